use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dcs_cli::args::{Cli, Command};
use dcs_cli::commands;
use dcs_core::report::EvalReport;

// Like println!, but a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn summary_line(label: &str, r: &EvalReport) {
    say!(
        "{label:<10} acc={:.4} cobias={}",
        r.overall_accuracy,
        fmt_opt(r.cobias)
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Optimize(args) => {
            let o = commands::optimize(&args)?;
            say!(
                "best_z={} xi={} outer_loops={} evaluations={} wall_time={:.2}s",
                o.solve.best_z,
                o.solve.best_xi,
                o.solve.outer_loops_run,
                o.solve.evaluations,
                o.solve.wall_time
            );
            summary_line("dev raw", &o.dev_baseline);
            summary_line("dev dcs", &o.dev_report);
            say!("wrote {}", args.out.display());
        }
        Command::Apply(args) => {
            let o = commands::apply(&args)?;
            summary_line("applied", &o.report);
            if let Some(z) = o.reproduced_z {
                say!("optimization set recognized; recomputed z={z}");
            }
            say!("wrote {}", args.out.display());
        }
        Command::Oracle(args) => {
            let r = commands::oracle(&args)?;
            say!(
                "best_z={} xi={} evaluated={} ties={}",
                r.best_z,
                r.best_xi,
                r.num_evaluated,
                r.ties
            );
        }
        Command::Compare(args) => {
            let (_, summary) = commands::compare(&args)?;
            for s in summary {
                say!(
                    "{:<12} {:<6} beta={} tau={} acc={:.4}±{:.4} cobias={:.4}±{:.4} membership/weight={:.2}/{:.2}",
                    s.dataset,
                    s.mode.to_string(),
                    s.beta,
                    s.tau,
                    s.accuracy_mean,
                    s.accuracy_std,
                    s.cobias_mean,
                    s.cobias_std,
                    s.membership_mean,
                    s.weight_mean
                );
            }
            say!("wrote {}", args.out.display());
        }
        Command::Report(args) => {
            commands::report(&args)?;
        }
        Command::Synth(args) => {
            let ds = commands::synth(&args)?;
            say!(
                "wrote {} ({} rows, {} classes)",
                args.out.display(),
                ds.num_instances(),
                ds.num_classes()
            );
        }
        Command::Catalog(args) => {
            let path = commands::catalog(&args)?;
            say!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(dcs_cli::exit_code(&err) as u8)
        }
    }
}
