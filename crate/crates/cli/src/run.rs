//! Training, benchmark and evaluation commands.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use pmf_core::als::{als_train_on, AlsConfig};
use pmf_core::ccd::{ccd_train, ccdpp_train_on, CcdConfig, Variant};
use pmf_core::model::{read_model, write_model};
use pmf_core::{AnyModel, FactorModel, Precision, ProbeSet, RatingsMatrix, Runtime, Scalar, TrainReport, Triplet};

use crate::error::{CliError, Result};
use crate::io::{read_triplets, IdMap, RawRating};
use crate::split::split_ratings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Als,
    Ccd,
    Ccdpp,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Als => "als",
            Algorithm::Ccd => "ccd",
            Algorithm::Ccdpp => "ccdpp",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub k: usize,
    pub lambda: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub workers: usize,
    pub precision: Precision,
    pub seed: u64,
    pub train: PathBuf,
    pub probe: Option<PathBuf>,
    pub split_ratio: Option<f64>,
    pub out: PathBuf,
}

impl RunSpec {
    /// Defaults: CCD++, `k = 5`, `lambda = 0.1`, 15 outer and 15 inner
    /// iterations, double precision.
    pub fn new(train: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunSpec {
            algorithm: Algorithm::Ccdpp,
            k: 5,
            lambda: 0.1,
            outer_iters: 15,
            inner_iters: 15,
            workers: pmf_core::runtime::default_workers(),
            precision: Precision::Double,
            seed: 0,
            train: train.into(),
            probe: None,
            split_ratio: None,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.k == 0 || self.outer_iters == 0 || self.inner_iters == 0 || self.workers == 0 {
            return usage("k, iteration counts and workers must be at least 1".into());
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return usage(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.algorithm == Algorithm::Als && self.lambda == 0.0 {
            return usage("als needs lambda > 0".into());
        }
        if self.probe.is_some() && self.split_ratio.is_some() {
            return usage("give either a probe file or a split ratio, not both".into());
        }
        if let Some(r) = self.split_ratio {
            if !(r > 0.0 && r < 1.0) {
                return usage(format!("split ratio must be in (0, 1), got {r}"));
            }
        }
        Ok(())
    }
}

/// Train and probe ratings under one ID mapping.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub ids: IdMap,
    pub train: Vec<Triplet<f64>>,
    pub probe: ProbeSet,
}

impl Dataset {
    /// Maps external IDs over the union of both sets, so probe users or items
    /// absent from train get empty rows (and predict 0).
    pub fn from_raw(train: &[RawRating], probe: &[RawRating]) -> Result<Self> {
        let ids = IdMap::build([train, probe]);
        Ok(Dataset {
            train: ids.internal(train)?,
            probe: ProbeSet::new(ids.internal(probe)?),
            ids,
        })
    }

    pub fn load(spec: &RunSpec) -> Result<Self> {
        let all = read_triplets(&spec.train)?;
        match (&spec.probe, spec.split_ratio) {
            (Some(p), _) => Self::from_raw(&all, &read_triplets(p)?),
            (None, Some(r)) => {
                let (train, probe) = split_ratings(&all, r, spec.seed)?;
                Self::from_raw(&train, &probe)
            }
            (None, None) => Self::from_raw(&all, &[]),
        }
    }

    pub fn users(&self) -> usize {
        self.ids.users_len()
    }

    pub fn items(&self) -> usize {
        self.ids.items_len()
    }

    pub fn matrix<T: Scalar>(&self) -> Result<RatingsMatrix<T>> {
        let t: Vec<Triplet<T>> = self.train.iter().map(|x| Triplet::new(x.user, x.item, T::of(x.rating))).collect();
        Ok(RatingsMatrix::from_triplets(&t, self.users(), self.items())?)
    }
}

/// Trains with the scalar type fixed by the caller.
pub fn fit<T: Scalar>(spec: &RunSpec, data: &Dataset, runtime: &Runtime) -> Result<(FactorModel<T>, TrainReport)> {
    spec.validate()?;
    let a = data.matrix::<T>()?;
    let probe = (!data.probe.is_empty()).then_some(&data.probe);
    let ccd = CcdConfig {
        k: spec.k,
        lambda: spec.lambda,
        outer_iters: spec.outer_iters,
        inner_iters: spec.inner_iters,
        workers: runtime.workers(),
        seed: spec.seed,
        variant: Variant::CcdPlusPlus,
    };
    Ok(match spec.algorithm {
        Algorithm::Als => {
            let config = AlsConfig {
                k: spec.k,
                lambda: spec.lambda,
                outer_iters: spec.outer_iters,
                workers: runtime.workers(),
                seed: spec.seed,
            };
            als_train_on(&config, &a, probe, runtime)?
        }
        Algorithm::Ccdpp => ccdpp_train_on(&ccd, &a, probe, runtime)?,
        Algorithm::Ccd => {
            if runtime.workers() > 1 {
                log::warn!("ccd runs sequentially; ignoring {} workers", runtime.workers());
            }
            ccd_train(&CcdConfig { variant: Variant::Ccd, ..ccd }, &a, probe)?
        }
    })
}

/// Trains in the precision named by the spec.
pub fn fit_any(spec: &RunSpec, data: &Dataset, runtime: &Runtime) -> Result<(AnyModel, TrainReport)> {
    Ok(match spec.precision {
        Precision::Single => {
            let (m, r) = fit::<f32>(spec, data, runtime)?;
            (AnyModel::Single(m), r)
        }
        Precision::Double => {
            let (m, r) = fit::<f64>(spec, data, runtime)?;
            (AnyModel::Double(m), r)
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub spec: RunSpec,
    pub users: usize,
    pub items: usize,
    pub train_ratings: usize,
    pub probe_ratings: usize,
    pub train_seconds: f64,
    pub final_objective: Option<f64>,
    pub final_rmse: Option<f64>,
    pub report: TrainReport,
}

pub const MODEL_FILE: &str = "model.bin";
pub const IDS_FILE: &str = "ids.json";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_TXT: &str = "report.txt";
pub const SUMMARY_FILE: &str = "summary.json";

/// Human-readable per-iteration table.
pub fn format_report(report: &TrainReport) -> String {
    let mut s = format!(
        "{} | {} workers | {}\niteration | seconds | objective | rmse\n",
        report.algorithm, report.workers, report.precision
    );
    for r in &report.iterations {
        let rmse = r.rmse.map_or("-".to_string(), |x| format!("{x:.6}"));
        s += &format!("{} | {:.3} | {:.6e} | {}\n", r.iteration, r.seconds, r.objective, rmse);
    }
    s
}

fn write_json_lines<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::write(path, e))?;
    let mut w = BufWriter::new(f);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| CliError::write(path, e))?;
        w.write_all(b"\n").map_err(|e| CliError::write(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

/// Loads data, trains, and writes the model, ID map and reports into
/// `spec.out`.
pub fn cmd_train(spec: &RunSpec) -> Result<Summary> {
    spec.validate()?;
    let data = Dataset::load(spec)?;
    let runtime = Runtime::new(spec.workers)?;
    let (model, report) = fit_any(spec, &data, &runtime)?;

    let out = &spec.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::write(out, e))?;
    let mut buf = Vec::new();
    match &model {
        AnyModel::Single(m) => write_model(m, &mut buf)?,
        AnyModel::Double(m) => write_model(m, &mut buf)?,
    }
    write_output(&out.join(MODEL_FILE), &buf)?;
    data.ids.save(&out.join(IDS_FILE))?;
    write_json_lines(&out.join(REPORT_JSONL), &report.iterations)?;
    write_output(&out.join(REPORT_TXT), format_report(&report).as_bytes())?;
    let summary = Summary {
        spec: spec.clone(),
        users: data.users(),
        items: data.items(),
        train_ratings: data.train.len(),
        probe_ratings: data.probe.len(),
        train_seconds: report.train_seconds(),
        final_objective: report.final_objective(),
        final_rmse: report.final_rmse(),
        report,
    };
    let json = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_output(&out.join(SUMMARY_FILE), &json)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub seconds: f64,
    pub speedup: f64,
    pub final_rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    /// True when every row reports the same final RMSE to 4 decimals.
    pub fn rmse_constant(&self) -> bool {
        let key = |r: &BenchRow| r.final_rmse.map(|x| format!("{x:.4}"));
        self.rows.windows(2).all(|w| key(&w[0]) == key(&w[1]))
    }
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Test | Execution time | Speedup | Final RMSE")?;
        for r in &self.rows {
            let unit = if r.workers == 1 { "thread" } else { "threads" };
            let rmse = r.final_rmse.map_or("-".to_string(), |x| format!("{x:.6}"));
            writeln!(f, "{} {unit} | {:.3}s | {:.1} | {rmse}", r.workers, r.seconds, r.speedup)?;
        }
        Ok(())
    }
}

/// Runs the same spec once per worker count. Times are training time only.
pub fn bench_dataset(spec: &RunSpec, data: &Dataset, workers: &[usize]) -> Result<BenchTable> {
    if workers.is_empty() || !workers.contains(&1) {
        return Err(CliError::Usage("worker list must include 1 as the baseline".into()));
    }
    let mut timed = Vec::new();
    for &p in workers {
        let runtime = Runtime::new(p)?;
        let (_, report) = fit_any(&RunSpec { workers: p, ..spec.clone() }, data, &runtime)?;
        log::info!("{p} workers: {:.3}s", report.train_seconds());
        timed.push((p, report.train_seconds(), report.final_rmse()));
    }
    let base = timed.iter().find(|t| t.0 == 1).map(|t| t.1).expect("baseline present");
    let rows = timed
        .into_iter()
        .map(|(workers, seconds, final_rmse)| {
            Ok(BenchRow {
                workers,
                seconds,
                speedup: pmf_core::runtime::speedup(base, seconds)?,
                final_rmse,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BenchTable { rows })
}

pub fn cmd_bench(spec: &RunSpec, workers: &[usize]) -> Result<BenchTable> {
    spec.validate()?;
    let data = Dataset::load(spec)?;
    let table = bench_dataset(spec, &data, workers)?;
    std::fs::create_dir_all(&spec.out).map_err(|e| CliError::write(&spec.out, e))?;
    write_output(&spec.out.join("bench.txt"), table.to_string().as_bytes())?;
    write_json_lines(&spec.out.join("bench.jsonl"), &table.rows)?;
    Ok(table)
}

/// Probe RMSE of a saved model. IDs go through the `ids.json` saved next to
/// the model when present; otherwise they are read as 0-based indices.
pub fn cmd_eval(model_path: &Path, probe_path: &Path) -> Result<f64> {
    let bytes = std::fs::read(model_path).map_err(|e| CliError::read(model_path, e))?;
    let model = read_model(&bytes[..])?;
    let raw = read_triplets(probe_path)?;
    let ids_path = model_path.with_file_name(IDS_FILE);
    let entries = if ids_path.exists() {
        IdMap::load(&ids_path)?.internal(&raw)?
    } else {
        raw.iter().map(|r| Triplet::new(r.user as usize, r.item as usize, r.rating)).collect()
    };
    let probe = ProbeSet::new(entries);
    let (m, n, _) = model.dims();
    probe.check_dims(m, n)?;
    Ok(model.rmse(&probe)?)
}
