//! Post-hoc debiasing of multi-class classifier probabilities.
//!
//! Every class picks one correction from a catalog of triangular membership
//! functions (sample-level) and weight coefficients (class-level). The
//! selection minimizes error rate, pairwise class-accuracy imbalance
//! (COBias) and negative per-class PMI, and is found by simulated annealing.

pub mod annealer;
pub mod data;
pub mod error;
pub mod functions;
pub mod objective;
pub mod oracle;
pub mod report;
pub mod scheme;
pub mod synth;

pub use annealer::{anneal, anneal_in, AnnealConfig, SolveResult};
pub use data::{load_dataset, split_dataset, DatasetSplit, Format, LabeledDataset};
pub use error::{Error, ErrorKind, Result};
pub use functions::{Domain, FunctionSet, SearchMode, SelectionVector, TriangularMembership};
pub use objective::{objective_value, predict, ObjectiveMode, ObjectiveWeights};
pub use oracle::{exhaustive_search, exhaustive_search_in, OracleResult};
pub use report::EvalReport;
pub use scheme::SchemeFile;
pub use synth::BiasProfile;
