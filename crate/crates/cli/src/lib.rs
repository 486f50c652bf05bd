//! Command-line front end for `pmf-core`: rating files, train/probe splits,
//! training runs, evaluation and speedup tables.

pub mod args;
pub mod error;
pub mod io;
pub mod run;
pub mod split;
pub mod synth;

pub use error::{CliError, Result};
pub use io::{IdMap, RawRating};
pub use run::{cmd_bench, cmd_eval, cmd_train, Algorithm, BenchTable, Dataset, RunSpec};
pub use split::cmd_split;
