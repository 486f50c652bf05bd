//! Alternating least squares.
//!
//! Each half-step solves, independently for every user (then every item),
//! the ridge-regularized normal equations
//! `(H_i^T H_i + lambda I) w_i = H_i^T a_i` by Cholesky factorization, where
//! `H_i` stacks the factors of the items user `i` rated. Rows are independent,
//! so a half-step is one parallel stage over a row (column) partition.

use std::time::Instant;

use crate::dense::{accumulate_outer, cholesky_factor, cholesky_solve_into, finish_gram, SmallMatrix};
use crate::error::{check_index, Error, Result};
use crate::model::{self, init_als, FactorModel, ProbeSet};
use crate::report::TrainReport;
use crate::runtime::{default_workers, Layout, Partition, Runtime, Stage, StageLog, StagePlan, WorkModel};
use crate::scalar::Scalar;
use crate::sparse::RatingsMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct AlsConfig {
    pub k: usize,
    pub lambda: f64,
    pub outer_iters: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            k: 5,
            lambda: 0.1,
            outer_iters: 15,
            workers: default_workers(),
            seed: 0,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "ALS needs lambda > 0, got {}",
                self.lambda
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::Parameter("outer_iters must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Parameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solves one regularized least-squares row into `out`.
///
/// `indices`/`values` are the observed entries of the row; `other` is the
/// fixed factor matrix (row-major, rank `k`). Gram and right-hand side are
/// accumulated in ascending index order. An empty row yields zero.
fn solve_row_into<T: Scalar>(
    indices: &[u32],
    values: &[T],
    other: &[T],
    lambda: T,
    k: usize,
    out: &mut [T],
) -> Result<()> {
    if indices.is_empty() {
        out.fill(T::zero());
        return Ok(());
    }
    let mut gram = SmallMatrix::zeros(k);
    let mut rhs = vec![T::zero(); k];
    for (&j, &a) in indices.iter().zip(values) {
        let hj = &other[j as usize * k..(j as usize + 1) * k];
        accumulate_outer(&mut gram, hj);
        for (b, &h) in rhs.iter_mut().zip(hj) {
            *b += a * h;
        }
    }
    finish_gram(&mut gram, lambda);
    let l = cholesky_factor(&gram)?;
    cholesky_solve_into(&l, &rhs, out)
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda >= T::zero() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")))
    }
}

/// `w_i* = (H_i^T H_i + lambda I)^{-1} H^T a_i` for user `i`.
pub fn solve_user_row<T: Scalar>(i: usize, h: &[T], a: &RatingsMatrix<T>, lambda: T, k: usize) -> Result<Vec<T>> {
    check_index("user", i, a.rows())?;
    check_lambda(lambda)?;
    check_len(h, a.cols(), k)?;
    let p = a.pattern();
    let range = p.row_range(i);
    let mut out = vec![T::zero(); k];
    solve_row_into(&p.col_of()[range.clone()], &a.row_values()[range], h, lambda, k, &mut out)?;
    Ok(out)
}

/// `h_j* = (W_j^T W_j + lambda I)^{-1} W^T a_j` for item `j`.
pub fn solve_item_row<T: Scalar>(j: usize, w: &[T], a: &RatingsMatrix<T>, lambda: T, k: usize) -> Result<Vec<T>> {
    check_index("item", j, a.cols())?;
    check_lambda(lambda)?;
    check_len(w, a.rows(), k)?;
    let p = a.pattern();
    let range = p.col_range(j);
    let mut out = vec![T::zero(); k];
    solve_row_into(&p.row_of()[range.clone()], &a.col_values()[range], w, lambda, k, &mut out)?;
    Ok(out)
}

fn check_len<T>(factors: &[T], rows: usize, k: usize) -> Result<()> {
    if factors.len() != rows * k {
        return Err(Error::Dimension(format!(
            "factor buffer of length {} for {rows} rows at rank {k}",
            factors.len()
        )));
    }
    Ok(())
}

const UPLOAD: &str = "upload";
const UPDATE_W: &str = "update_w";
const UPDATE_H: &str = "update_h";
const DOWNLOAD: &str = "download";

fn als_plan<T: Scalar>(a: &RatingsMatrix<T>, k: usize) -> StagePlan {
    let width = T::PRECISION.bytes() as u64;
    let nnz = a.nnz() as u64;
    // values plus one 4-byte index per entry in each layout
    let ratings = 2 * nnz * (width + 4);
    let w = (a.rows() * k) as u64 * width;
    let h = (a.cols() * k) as u64 * width;
    StagePlan::new(vec![
        Stage::new(UPLOAD).copy_in("A", ratings).copy_in("W", w).copy_in("H", h),
        Stage::new(UPDATE_W).uses(&["A", "H", "W"]),
        Stage::new(UPDATE_H).uses(&["A", "W", "H"]),
        Stage::new(DOWNLOAD).copy_out("W", w).copy_out("H", h),
    ])
    .expect("static ALS plan is valid")
}

/// Staged ALS state: the model plus the partitions and plan it runs on.
pub struct AlsSolver<'a, T> {
    a: &'a RatingsMatrix<T>,
    model: FactorModel<T>,
    lambda: f64,
    runtime: &'a Runtime,
    rows: Partition,
    cols: Partition,
    plan: StagePlan,
    log: StageLog,
}

impl<'a, T: Scalar> AlsSolver<'a, T> {
    /// Initializes `H` from `config.seed` and uploads `A`, `W`, `H`.
    pub fn new(config: &AlsConfig, a: &'a RatingsMatrix<T>, runtime: &'a Runtime) -> Result<Self> {
        config.validate()?;
        let mut model = FactorModel::new(a.rows(), a.cols(), config.k)?;
        init_als(&mut model, config.seed);
        Self::with_model(model, config.lambda, a, runtime)
    }

    /// Continues from an existing model.
    pub fn with_model(model: FactorModel<T>, lambda: f64, a: &'a RatingsMatrix<T>, runtime: &'a Runtime) -> Result<Self> {
        model.check_matches(a)?;
        if !(lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let rows = runtime.balanced(&WorkModel::rows(a.pattern()));
        let cols = runtime.balanced(&WorkModel::cols(a.pattern()));
        let plan = als_plan(a, model.rank());
        let mut log = StageLog::new();
        runtime.transfer(plan.stage(UPLOAD), &mut log);
        Ok(AlsSolver {
            a,
            model,
            lambda,
            runtime,
            rows,
            cols,
            plan,
            log,
        })
    }

    pub fn model(&self) -> &FactorModel<T> {
        &self.model
    }

    /// Recomputes every user row from the current `H`.
    pub fn update_w(&mut self) -> Result<()> {
        let k = self.model.rank();
        let lambda = T::of(self.lambda);
        let p = self.a.pattern();
        let vals = self.a.row_values();
        let (w, h) = self.model.factors_mut();
        let h: &[T] = h;
        self.runtime
            .execute(self.plan.stage(UPDATE_W), &mut self.log, &self.rows, w, Layout::Strided(k), |i, out| {
                let range = p.row_range(i);
                solve_row_into(&p.col_of()[range.clone()], &vals[range], h, lambda, k, out)
            })
            .map_err(|e| e.source)
    }

    /// Recomputes every item row from the current `W`.
    pub fn update_h(&mut self) -> Result<()> {
        let k = self.model.rank();
        let lambda = T::of(self.lambda);
        let p = self.a.pattern();
        let vals = self.a.col_values();
        let (w, h) = self.model.factors_mut();
        let w: &[T] = w;
        self.runtime
            .execute(self.plan.stage(UPDATE_H), &mut self.log, &self.cols, h, Layout::Strided(k), |j, out| {
                let range = p.col_range(j);
                solve_row_into(&p.row_of()[range.clone()], &vals[range], w, lambda, k, out)
            })
            .map_err(|e| e.source)
    }

    /// `W` phase, barrier, `H` phase.
    pub fn epoch(&mut self) -> Result<()> {
        self.update_w()?;
        self.update_h()
    }

    pub fn objective(&self) -> f64 {
        model::objective(&self.model, self.a, self.lambda).expect("dimensions checked at construction")
    }

    pub fn log(&self) -> &StageLog {
        &self.log
    }

    /// Downloads the factors and returns them with the stage log.
    pub fn finish(mut self) -> (FactorModel<T>, StageLog) {
        self.runtime.transfer(self.plan.stage(DOWNLOAD), &mut self.log);
        (self.model, self.log)
    }
}

/// One ALS epoch over `runtime`. The result does not depend on the worker count.
pub fn als_epoch<T: Scalar>(model: &mut FactorModel<T>, a: &RatingsMatrix<T>, lambda: f64, runtime: &Runtime) -> Result<()> {
    let owned = std::mem::replace(model, FactorModel::new(1, 1, 1)?);
    let mut solver = AlsSolver::with_model(owned, lambda, a, runtime)?;
    let res = solver.epoch();
    *model = solver.finish().0;
    res
}

/// Runs `config.outer_iters` epochs on a fresh `config.workers`-wide runtime.
pub fn als_train<T: Scalar>(
    config: &AlsConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
) -> Result<(FactorModel<T>, TrainReport)> {
    config.validate()?;
    let runtime = Runtime::new(config.workers)?;
    als_train_on(config, a, probe, &runtime)
}

/// [`als_train`] on a caller-provided runtime.
pub fn als_train_on<T: Scalar>(
    config: &AlsConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
    runtime: &Runtime,
) -> Result<(FactorModel<T>, TrainReport)> {
    if let Some(p) = probe {
        p.check_dims(a.rows(), a.cols())?;
    }
    let mut solver = AlsSolver::new(config, a, runtime)?;
    let mut report = TrainReport::new("als", runtime.workers(), T::PRECISION);
    for _ in 0..config.outer_iters {
        let started = Instant::now();
        solver.epoch()?;
        let seconds = started.elapsed().as_secs_f64();
        let rmse = match probe {
            Some(p) if !p.is_empty() => Some(model::rmse(solver.model(), p)?),
            _ => None,
        };
        report.push(seconds, solver.objective(), rmse);
    }
    let (model, log) = solver.finish();
    report.stages = log.records().to_vec();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplet;

    #[test]
    fn empty_rows_give_zero() {
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 3.0)], 2, 2).unwrap();
        let h = vec![0.5; 4];
        assert_eq!(solve_user_row(1, &h, &a, 0.1, 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(solve_item_row(1, &h, &a, 0.1, 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_closed_form() {
        // k = 1, A = [4], h = 2: w = 4 * 2 / (2^2 + lambda) ~ 2
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 4.0)], 1, 1).unwrap();
        let w: Vec<f64> = solve_user_row(0, &[2.0], &a, 1e-12, 1).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-11);
        let h: Vec<f64> = solve_item_row(0, &[2.0], &a, 1e-12, 1).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn zero_lambda_on_rank_deficient_row_fails() {
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 1.0)], 1, 1).unwrap();
        assert!(matches!(
            solve_user_row(0, &[1.0, 1.0], &a, 0.0, 2),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(solve_user_row(0, &[1.0, 1.0], &a, -1.0, 2).is_err());
        assert!(solve_user_row(1, &[1.0, 1.0], &a, 0.1, 2).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AlsConfig::default().validate().is_ok());
        let bad = AlsConfig { lambda: 0.0, ..AlsConfig::default() };
        assert!(bad.validate().is_err());
        let bad = AlsConfig { outer_iters: 0, ..AlsConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_rating_epoch_matches_hand_steps() {
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 3.0)], 1, 1).unwrap();
        let config = AlsConfig { k: 1, lambda: 0.5, outer_iters: 1, workers: 1, seed: 11 };
        let rt = Runtime::sequential();
        let mut solver = AlsSolver::new(&config, &a, &rt).unwrap();
        let h0: f64 = solver.model().h()[0];
        solver.epoch().unwrap();
        let w1 = 3.0 * h0 / (h0 * h0 + 0.5);
        let h1 = 3.0 * w1 / (w1 * w1 + 0.5);
        assert!((solver.model().w()[0] - w1).abs() <= 1e-14 * w1.abs());
        assert!((solver.model().h()[0] - h1).abs() <= 1e-14 * h1.abs());
    }

    #[test]
    fn probe_outside_matrix_is_rejected() {
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 3.0)], 1, 1).unwrap();
        let probe = ProbeSet::new(vec![Triplet::new(0, 1, 2.0)]);
        let config = AlsConfig { k: 1, workers: 1, ..AlsConfig::default() };
        assert!(matches!(als_train(&config, &a, Some(&probe)), Err(Error::Dimension(_))));
    }
}
