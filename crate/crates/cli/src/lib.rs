//! Command-line front end: optimize, apply, oracle, compare, report, synth
//! and catalog subcommands over `dcs-core`.

pub mod args;
pub mod commands;

use dcs_core::{Error, ErrorKind};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit status for a failed command: 2 validation, 3 solver precondition,
/// 4 I/O.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Solver => EXIT_SOLVER,
                ErrorKind::Io => EXIT_IO,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}
