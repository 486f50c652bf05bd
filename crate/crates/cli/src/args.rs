//! Command-line flags. Every flag can also come from a `PMF_`-prefixed
//! environment variable, e.g. `PMF_WORKERS=8` or `PMF_SPLIT_RATIO=0.2`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use pmf_core::Precision;

use crate::run::{Algorithm, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "pmf", version, about = "Parallel matrix factorization for rating data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a rating file into train.txt and probe.txt.
    Split(SplitArgs),
    /// Train a model and write model, ID map and reports.
    Train(RunArgs),
    /// Train once per worker count and print a speedup table.
    Bench(BenchArgs),
    /// Probe RMSE of a saved model.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, env = "PMF_INPUT")]
    pub input: PathBuf,
    /// Fraction of ratings moved to the probe set.
    #[arg(long, env = "PMF_SPLIT_RATIO", default_value_t = 0.2)]
    pub split_ratio: f64,
    #[arg(long, env = "PMF_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "PMF_OUT", default_value = "pmf-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, env = "PMF_ALGORITHM", value_enum, default_value_t = Algorithm::Ccdpp)]
    pub algorithm: Algorithm,
    #[arg(long, env = "PMF_K", default_value_t = 5)]
    pub k: usize,
    #[arg(long, env = "PMF_LAMBDA", default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, env = "PMF_OUTER_ITERS", default_value_t = 15)]
    pub outer_iters: usize,
    /// Alternating passes per feature (ccdpp only).
    #[arg(long, env = "PMF_INNER_ITERS", default_value_t = 15)]
    pub inner_iters: usize,
    /// Defaults to the available parallelism.
    #[arg(long, env = "PMF_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "PMF_PRECISION", default_value = "double")]
    pub precision: Precision,
    #[arg(long, env = "PMF_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "PMF_TRAIN")]
    pub train: PathBuf,
    #[arg(long, env = "PMF_PROBE", conflicts_with = "split_ratio")]
    pub probe: Option<PathBuf>,
    /// Hold out this fraction of the train file as the probe set.
    #[arg(long, env = "PMF_SPLIT_RATIO")]
    pub split_ratio: Option<f64>,
    #[arg(long, env = "PMF_OUT", default_value = "pmf-out")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn spec(&self) -> RunSpec {
        RunSpec {
            algorithm: self.algorithm,
            k: self.k,
            lambda: self.lambda,
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters,
            workers: self.workers.unwrap_or_else(pmf_core::runtime::default_workers),
            precision: self.precision,
            seed: self.seed,
            train: self.train.clone(),
            probe: self.probe.clone(),
            split_ratio: self.split_ratio,
            out: self.out.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated worker counts; must include 1.
    #[arg(long, env = "PMF_WORKER_LIST", value_delimiter = ',', default_value = "1,2,4")]
    pub worker_list: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "PMF_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "PMF_PROBE")]
    pub probe: PathBuf,
}
