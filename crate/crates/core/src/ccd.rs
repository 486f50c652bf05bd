//! Coordinate descent: element-wise CCD and feature-wise CCD++.
//!
//! Both solvers keep the residual `R_ij = A_ij - w_i . h_j` on the observed
//! entries and update it incrementally.
//!
//! CCD sweeps users then items, minimizing the objective over one scalar
//! `w_it` (then `h_jt`) at a time. It runs sequentially.
//!
//! CCD++ refits one feature column pair `(W[:, t], H[:, t])` at a time as a
//! rank-one problem on `R_hat = R + W[:, t] H[:, t]^T`, alternating closed-form
//! updates of the whole column `u` and the whole column `v`. Each update is a
//! parallel stage over a row (column) partition; `R_hat` is built and torn
//! down in place of `R`, both layouts updated by their own stage with the
//! same arithmetic so the two copies stay bit-identical.

use std::time::Instant;

use crate::error::{check_index, Error, Result};
use crate::model::{self, init_ccd, FactorModel, ProbeSet};
use crate::report::TrainReport;
use crate::runtime::{default_workers, Layout, Partition, Runtime, Stage, StageLog, StagePlan, WorkModel};
use crate::scalar::Scalar;
use crate::sparse::{RatingsMatrix, ResidualMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Element-wise updates, user sweep then item sweep.
    Ccd,
    /// Feature-wise rank-one updates.
    CcdPlusPlus,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Ccd => "ccd",
            Variant::CcdPlusPlus => "ccdpp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcdConfig {
    pub k: usize,
    pub lambda: f64,
    pub outer_iters: usize,
    /// Alternating `u`/`v` passes per feature (CCD++ only).
    pub inner_iters: usize,
    pub workers: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for CcdConfig {
    fn default() -> Self {
        CcdConfig {
            k: 5,
            lambda: 0.1,
            outer_iters: 15,
            inner_iters: 15,
            workers: default_workers(),
            seed: 0,
            variant: Variant::CcdPlusPlus,
        }
    }
}

impl CcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::Parameter("outer_iters and inner_iters must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Parameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn ratio_or_zero<T: Scalar>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

fn check_model<T: Scalar>(r: &ResidualMatrix<T>, model: &FactorModel<T>, t: usize) -> Result<()> {
    let p = r.pattern();
    if p.rows() != model.users() || p.cols() != model.items() {
        return Err(Error::Dimension(format!(
            "model is {} x {} but residual is {} x {}",
            model.users(),
            model.items(),
            p.rows(),
            p.cols()
        )));
    }
    check_index("feature", t, model.rank())
}

/// Minimizer over `z` of `sum_j (R_ij + w_it h_jt - z h_jt)^2 + lambda z^2`.
/// Zero when the denominator vanishes.
pub fn ccd_z_star<T: Scalar>(i: usize, t: usize, r: &ResidualMatrix<T>, model: &FactorModel<T>, lambda: T) -> Result<T> {
    check_model(r, model, t)?;
    check_index("user", i, model.users())?;
    let p = r.pattern();
    let k = model.rank();
    let h = model.h();
    let wit = model.w()[i * k + t];
    let vals = r.row_values();
    let (mut num, mut den) = (T::zero(), lambda);
    for e in p.row_range(i) {
        let hjt = h[p.col_of()[e] as usize * k + t];
        num += (vals[e] + wit * hjt) * hjt;
        den += hjt * hjt;
    }
    Ok(ratio_or_zero(num, den))
}

/// `R_ij -= (z - w_it) h_jt` for every rated `j` (both layouts), then `w_it = z`.
pub fn ccd_apply_z<T: Scalar>(i: usize, t: usize, z: T, r: &mut ResidualMatrix<T>, model: &mut FactorModel<T>) -> Result<()> {
    check_model(r, model, t)?;
    check_index("user", i, model.users())?;
    let k = model.rank();
    let delta = z - model.w()[i * k + t];
    let range = r.pattern().row_range(i);
    for e in range {
        let j = r.pattern().col_of()[e] as usize;
        let step = delta * model.h()[j * k + t];
        r.sub_at_row_entry(e, step);
    }
    model.w_mut()[i * k + t] = z;
    Ok(())
}

/// Minimizer over `s` of `sum_i (R_ij + w_it h_jt - w_it s)^2 + lambda s^2`.
pub fn ccd_s_star<T: Scalar>(j: usize, t: usize, r: &ResidualMatrix<T>, model: &FactorModel<T>, lambda: T) -> Result<T> {
    check_model(r, model, t)?;
    check_index("item", j, model.items())?;
    let p = r.pattern();
    let k = model.rank();
    let w = model.w();
    let hjt = model.h()[j * k + t];
    let vals = r.col_values();
    let (mut num, mut den) = (T::zero(), lambda);
    for e in p.col_range(j) {
        let wit = w[p.row_of()[e] as usize * k + t];
        num += (vals[e] + wit * hjt) * wit;
        den += wit * wit;
    }
    Ok(ratio_or_zero(num, den))
}

/// `R_ij -= (s - h_jt) w_it` for every rating user `i` (both layouts), then `h_jt = s`.
pub fn ccd_apply_s<T: Scalar>(j: usize, t: usize, s: T, r: &mut ResidualMatrix<T>, model: &mut FactorModel<T>) -> Result<()> {
    check_model(r, model, t)?;
    check_index("item", j, model.items())?;
    let k = model.rank();
    let delta = s - model.h()[j * k + t];
    let range = r.pattern().col_range(j);
    for e in range {
        let i = r.pattern().row_of()[e] as usize;
        let step = delta * model.w()[i * k + t];
        r.sub_at_col_entry(e, step);
    }
    model.h_mut()[j * k + t] = s;
    Ok(())
}

/// One CCD sweep: every `w_it` (users ascending, features ascending), then
/// every `h_jt` likewise.
pub fn ccd_epoch<T: Scalar>(model: &mut FactorModel<T>, r: &mut ResidualMatrix<T>, lambda: f64) -> Result<()> {
    let lambda = T::of(lambda);
    for i in 0..model.users() {
        for t in 0..model.rank() {
            let z = ccd_z_star(i, t, r, model, lambda)?;
            ccd_apply_z(i, t, z, r, model)?;
        }
    }
    for j in 0..model.items() {
        for t in 0..model.rank() {
            let s = ccd_s_star(j, t, r, model, lambda)?;
            ccd_apply_s(j, t, s, r, model)?;
        }
    }
    Ok(())
}

/// Row and column partitions a CCD++ run is scheduled on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub rows: Partition,
    pub cols: Partition,
}

impl Schedule {
    /// Cost-balanced partitions using `4 |Omega_i|` per row and column.
    pub fn balanced<T: Scalar>(a: &RatingsMatrix<T>, runtime: &Runtime) -> Self {
        Schedule {
            rows: runtime.balanced(&WorkModel::rows(a.pattern())),
            cols: runtime.balanced(&WorkModel::cols(a.pattern())),
        }
    }

    pub fn uniform<T: Scalar>(a: &RatingsMatrix<T>, runtime: &Runtime) -> Self {
        Schedule {
            rows: runtime.uniform(a.rows()),
            cols: runtime.uniform(a.cols()),
        }
    }

    fn check(&self, m: usize, n: usize) {
        assert_eq!(self.rows.len(), m, "row partition does not cover every row");
        assert_eq!(self.cols.len(), n, "column partition does not cover every column");
    }
}

const UPLOAD: &str = "upload";
const LOAD_UV: &str = "load_uv";
const BUILD_RHAT_ROWS: &str = "build_rhat_rows";
const BUILD_RHAT_COLS: &str = "build_rhat_cols";
const UPDATE_U: &str = "update_u";
const UPDATE_V: &str = "update_v";
const DOWNLOAD_UV: &str = "download_uv";
const STORE_W: &str = "store_w";
const STORE_H: &str = "store_h";
const RESTORE_R_ROWS: &str = "restore_r_rows";
const RESTORE_R_COLS: &str = "restore_r_cols";

fn ccdpp_plan<T: Scalar>(a: &RatingsMatrix<T>) -> StagePlan {
    let width = T::PRECISION.bytes() as u64;
    let layout = a.nnz() as u64 * (width + 4);
    let u = a.rows() as u64 * width;
    let v = a.cols() as u64 * width;
    StagePlan::new(vec![
        Stage::new(UPLOAD).copy_in("R_rows", layout).copy_in("R_cols", layout),
        Stage::new(LOAD_UV).copy_in("u", u).copy_in("v", v),
        Stage::new(BUILD_RHAT_ROWS).uses(&["R_rows", "u", "v"]),
        Stage::new(BUILD_RHAT_COLS).uses(&["R_cols", "u", "v"]),
        Stage::new(UPDATE_U).uses(&["R_rows", "u", "v"]),
        Stage::new(UPDATE_V).uses(&["R_cols", "u", "v"]),
        Stage::new(DOWNLOAD_UV).copy_out("u", u).copy_out("v", v),
        Stage::new(STORE_W),
        Stage::new(STORE_H),
        Stage::new(RESTORE_R_ROWS).uses(&["R_rows", "u", "v"]),
        Stage::new(RESTORE_R_COLS).uses(&["R_cols", "u", "v"]),
    ])
    .expect("static CCD++ plan is valid")
}

/// Optional stage log threaded through the free CCD++ operations.
fn run<T: Send, F>(
    runtime: &Runtime,
    log: &mut Option<(&StagePlan, &mut StageLog)>,
    name: &str,
    partition: &Partition,
    out: &mut [T],
    layout: Layout<'_>,
    kernel: F,
) where
    F: Fn(usize, &mut [T]) + Sync,
{
    let elapsed = runtime.run(partition, out, layout, kernel);
    if let Some((plan, log)) = log {
        log.record(plan.stage(name), elapsed);
    }
}

fn rank_one_add<T: Scalar>(
    r: &mut ResidualMatrix<T>,
    u: &[T],
    v: &[T],
    sign: T,
    schedule: &Schedule,
    runtime: &Runtime,
    log: &mut Option<(&StagePlan, &mut StageLog)>,
    names: (&str, &str),
) {
    let (p, rows, cols) = r.split_mut();
    schedule.check(p.rows(), p.cols());
    assert_eq!(u.len(), p.rows());
    assert_eq!(v.len(), p.cols());
    let row_start = p.row_start();
    let col_start = p.col_start();
    let col_of = p.col_of();
    let row_of = p.row_of();
    run(runtime, log, names.0, &schedule.rows, rows, Layout::Offsets(row_start), |i, vals| {
        let base = row_start[i];
        let ui = u[i];
        for (off, x) in vals.iter_mut().enumerate() {
            *x += sign * (ui * v[col_of[base + off] as usize]);
        }
    });
    run(runtime, log, names.1, &schedule.cols, cols, Layout::Offsets(col_start), |j, vals| {
        let base = col_start[j];
        let vj = v[j];
        for (off, x) in vals.iter_mut().enumerate() {
            *x += sign * (u[row_of[base + off] as usize] * vj);
        }
    });
}

/// `R_hat_ij = R_ij + w_ti h_tj` over all observed entries, in place, both layouts.
pub fn ccdpp_build_rhat<T: Scalar>(
    r: &mut ResidualMatrix<T>,
    wbar_t: &[T],
    hbar_t: &[T],
    schedule: &Schedule,
    runtime: &Runtime,
) {
    rank_one_add(r, wbar_t, hbar_t, T::one(), schedule, runtime, &mut None, (BUILD_RHAT_ROWS, BUILD_RHAT_COLS));
}

fn update_u_stage<T: Scalar>(
    rhat: &ResidualMatrix<T>,
    u: &mut [T],
    v: &[T],
    lambda: T,
    rows: &Partition,
    runtime: &Runtime,
    log: &mut Option<(&StagePlan, &mut StageLog)>,
) {
    let p = rhat.pattern();
    assert_eq!(rows.len(), p.rows());
    let vals = rhat.row_values();
    run(runtime, log, UPDATE_U, rows, u, Layout::Strided(1), |i, ui| {
        let (mut num, mut den) = (T::zero(), lambda);
        for e in p.row_range(i) {
            let vj = v[p.col_of()[e] as usize];
            num += vals[e] * vj;
            den += vj * vj;
        }
        ui[0] = ratio_or_zero(num, den);
    });
}

fn update_v_stage<T: Scalar>(
    rhat: &ResidualMatrix<T>,
    u: &[T],
    v: &mut [T],
    lambda: T,
    cols: &Partition,
    runtime: &Runtime,
    log: &mut Option<(&StagePlan, &mut StageLog)>,
) {
    let p = rhat.pattern();
    assert_eq!(cols.len(), p.cols());
    let vals = rhat.col_values();
    run(runtime, log, UPDATE_V, cols, v, Layout::Strided(1), |j, vj| {
        let (mut num, mut den) = (T::zero(), lambda);
        for e in p.col_range(j) {
            let ui = u[p.row_of()[e] as usize];
            num += vals[e] * ui;
            den += ui * ui;
        }
        vj[0] = ratio_or_zero(num, den);
    });
}

/// `u_i = sum_j R_hat_ij v_j / (lambda + sum_j v_j^2)` for every user.
pub fn ccdpp_update_u<T: Scalar>(rhat: &ResidualMatrix<T>, u: &mut [T], v: &[T], lambda: T, rows: &Partition, runtime: &Runtime) {
    update_u_stage(rhat, u, v, lambda, rows, runtime, &mut None);
}

/// `v_j = sum_i R_hat_ij u_i / (lambda + sum_i u_i^2)` for every item.
pub fn ccdpp_update_v<T: Scalar>(rhat: &ResidualMatrix<T>, u: &[T], v: &mut [T], lambda: T, cols: &Partition, runtime: &Runtime) {
    update_v_stage(rhat, u, v, lambda, cols, runtime, &mut None);
}

fn writeback_stage<T: Scalar>(
    u: &[T],
    v: &[T],
    model: &mut FactorModel<T>,
    t: usize,
    r: &mut ResidualMatrix<T>,
    schedule: &Schedule,
    runtime: &Runtime,
    log: &mut Option<(&StagePlan, &mut StageLog)>,
) {
    let k = model.rank();
    assert!(t < k);
    let (w, h) = model.factors_mut();
    run(runtime, log, STORE_W, &schedule.rows, w, Layout::Strided(k), |i, row| row[t] = u[i]);
    run(runtime, log, STORE_H, &schedule.cols, h, Layout::Strided(k), |j, row| row[t] = v[j]);
    rank_one_add(r, u, v, -T::one(), schedule, runtime, log, (RESTORE_R_ROWS, RESTORE_R_COLS));
}

/// Stores `(u, v)` as feature column `t` and restores `R = R_hat - u v^T`.
pub fn ccdpp_writeback<T: Scalar>(
    u: &[T],
    v: &[T],
    model: &mut FactorModel<T>,
    t: usize,
    r: &mut ResidualMatrix<T>,
    schedule: &Schedule,
    runtime: &Runtime,
) {
    writeback_stage(u, v, model, t, r, schedule, runtime, &mut None);
}

/// `sum (R_hat_ij - u_i v_j)^2 + lambda (||u||^2 + ||v||^2)`, the rank-one
/// subproblem objective, in double precision.
pub fn rank_one_objective<T: Scalar>(rhat: &ResidualMatrix<T>, u: &[T], v: &[T], lambda: f64) -> f64 {
    let p = rhat.pattern();
    let vals = rhat.row_values();
    let mut acc = crate::sum::ExactSum::new();
    for i in 0..p.rows() {
        for e in p.row_range(i) {
            let j = p.col_of()[e] as usize;
            let err = vals[e].as_f64() - u[i].as_f64() * v[j].as_f64();
            acc.add(err * err);
        }
    }
    let mut norm = crate::sum::ExactSum::new();
    norm.extend(u.iter().chain(v).map(|x| x.as_f64() * x.as_f64()));
    acc.value() + lambda * norm.value()
}

/// Staged CCD++ state.
///
/// Drives the feature loop one phase at a time so callers can observe the
/// objective between phases: [`begin_feature`](Self::begin_feature), any
/// number of [`update_u`](Self::update_u)/[`update_v`](Self::update_v)
/// calls, then [`finish_feature`](Self::finish_feature).
pub struct CcdppSolver<'a, T> {
    a: &'a RatingsMatrix<T>,
    model: FactorModel<T>,
    residual: ResidualMatrix<T>,
    u: Vec<T>,
    v: Vec<T>,
    active: Option<usize>,
    lambda: f64,
    runtime: &'a Runtime,
    schedule: Schedule,
    plan: StagePlan,
    log: StageLog,
}

impl<'a, T: Scalar> CcdppSolver<'a, T> {
    /// `W = 0`, `H` seeded, `R = A`, residual uploaded.
    pub fn new(config: &CcdConfig, a: &'a RatingsMatrix<T>, runtime: &'a Runtime) -> Result<Self> {
        config.validate()?;
        let mut model = FactorModel::new(a.rows(), a.cols(), config.k)?;
        init_ccd(&mut model, config.seed);
        let schedule = Schedule::balanced(a, runtime);
        Self::with_state(model, a.residual(), config.lambda, a, runtime, schedule)
    }

    /// Continues from a model and its matching residual.
    pub fn with_state(
        model: FactorModel<T>,
        residual: ResidualMatrix<T>,
        lambda: f64,
        a: &'a RatingsMatrix<T>,
        runtime: &'a Runtime,
        schedule: Schedule,
    ) -> Result<Self> {
        model.check_matches(a)?;
        if !residual.shares_pattern_with(a) {
            return Err(Error::Dimension("residual does not share the ratings pattern".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        schedule.check(a.rows(), a.cols());
        let plan = ccdpp_plan(a);
        let mut log = StageLog::new();
        runtime.transfer(plan.stage(UPLOAD), &mut log);
        Ok(CcdppSolver {
            a,
            u: vec![T::zero(); a.rows()],
            v: vec![T::zero(); a.cols()],
            model,
            residual,
            active: None,
            lambda,
            runtime,
            schedule,
            plan,
            log,
        })
    }

    pub fn model(&self) -> &FactorModel<T> {
        &self.model
    }

    pub fn residual(&self) -> &ResidualMatrix<T> {
        &self.residual
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn active_feature(&self) -> Option<usize> {
        self.active
    }

    pub fn log(&self) -> &StageLog {
        &self.log
    }

    /// Loads `u, v` from column `t` and turns `R` into `R_hat`.
    pub fn begin_feature(&mut self, t: usize) {
        assert!(self.active.is_none(), "feature {:?} still open", self.active);
        assert!(t < self.model.rank());
        self.u = self.model.user_column(t);
        self.v = self.model.item_column(t);
        self.runtime.transfer(self.plan.stage(LOAD_UV), &mut self.log);
        let mut log = Some((&self.plan, &mut self.log));
        rank_one_add(
            &mut self.residual,
            &self.u,
            &self.v,
            T::one(),
            &self.schedule,
            self.runtime,
            &mut log,
            (BUILD_RHAT_ROWS, BUILD_RHAT_COLS),
        );
        self.active = Some(t);
    }

    pub fn update_u(&mut self) {
        assert!(self.active.is_some(), "no feature open");
        let mut log = Some((&self.plan, &mut self.log));
        update_u_stage(&self.residual, &mut self.u, &self.v, T::of(self.lambda), &self.schedule.rows, self.runtime, &mut log);
    }

    pub fn update_v(&mut self) {
        assert!(self.active.is_some(), "no feature open");
        let mut log = Some((&self.plan, &mut self.log));
        update_v_stage(&self.residual, &self.u, &mut self.v, T::of(self.lambda), &self.schedule.cols, self.runtime, &mut log);
    }

    /// Writes `u, v` back as column `t` and restores `R`.
    pub fn finish_feature(&mut self) {
        let t = self.active.take().expect("no feature open");
        self.runtime.transfer(self.plan.stage(DOWNLOAD_UV), &mut self.log);
        let mut log = Some((&self.plan, &mut self.log));
        writeback_stage(&self.u, &self.v, &mut self.model, t, &mut self.residual, &self.schedule, self.runtime, &mut log);
    }

    /// All `k` features, each with `inner_iters` alternating passes.
    pub fn outer_iteration(&mut self, inner_iters: usize) {
        for t in 0..self.model.rank() {
            self.begin_feature(t);
            for _ in 0..inner_iters {
                self.update_u();
                self.update_v();
            }
            self.finish_feature();
        }
    }

    /// Full objective of the current iterate; while a feature is open, its
    /// column is taken from `u, v`.
    pub fn objective(&self) -> f64 {
        match self.active {
            None => model::objective(&self.model, self.a, self.lambda).expect("dimensions checked"),
            Some(t) => {
                let mut m = self.model.clone();
                let k = m.rank();
                let (w, h) = m.factors_mut();
                for (i, &x) in self.u.iter().enumerate() {
                    w[i * k + t] = x;
                }
                for (j, &x) in self.v.iter().enumerate() {
                    h[j * k + t] = x;
                }
                model::objective(&m, self.a, self.lambda).expect("dimensions checked")
            }
        }
    }

    pub fn into_parts(self) -> (FactorModel<T>, ResidualMatrix<T>, StageLog) {
        assert!(self.active.is_none(), "feature still open");
        (self.model, self.residual, self.log)
    }
}

/// CCD++ on a fresh `config.workers`-wide runtime.
pub fn ccdpp_train<T: Scalar>(
    config: &CcdConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
) -> Result<(FactorModel<T>, TrainReport)> {
    config.validate()?;
    let runtime = Runtime::new(config.workers)?;
    ccdpp_train_on(config, a, probe, &runtime)
}

/// CCD++ on a caller-provided runtime. Bit-identical for any worker count.
pub fn ccdpp_train_on<T: Scalar>(
    config: &CcdConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
    runtime: &Runtime,
) -> Result<(FactorModel<T>, TrainReport)> {
    if let Some(p) = probe {
        p.check_dims(a.rows(), a.cols())?;
    }
    let mut solver = CcdppSolver::new(config, a, runtime)?;
    let mut report = TrainReport::new(Variant::CcdPlusPlus.name(), runtime.workers(), T::PRECISION);
    for _ in 0..config.outer_iters {
        let started = Instant::now();
        solver.outer_iteration(config.inner_iters);
        let seconds = started.elapsed().as_secs_f64();
        let rmse = eval(solver.model(), probe)?;
        report.push(seconds, solver.objective(), rmse);
    }
    let (model, _, log) = solver.into_parts();
    report.stages = log.records().to_vec();
    Ok((model, report))
}

/// Sequential element-wise CCD.
pub fn ccd_train<T: Scalar>(
    config: &CcdConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
) -> Result<(FactorModel<T>, TrainReport)> {
    config.validate()?;
    if let Some(p) = probe {
        p.check_dims(a.rows(), a.cols())?;
    }
    let mut model = FactorModel::new(a.rows(), a.cols(), config.k)?;
    init_ccd(&mut model, config.seed);
    let mut r = a.residual();
    let mut report = TrainReport::new(Variant::Ccd.name(), 1, T::PRECISION);
    for _ in 0..config.outer_iters {
        let started = Instant::now();
        ccd_epoch(&mut model, &mut r, config.lambda)?;
        let seconds = started.elapsed().as_secs_f64();
        let rmse = eval(&model, probe)?;
        report.push(seconds, model::objective(&model, a, config.lambda)?, rmse);
    }
    Ok((model, report))
}

/// Dispatches on `config.variant`.
pub fn train<T: Scalar>(
    config: &CcdConfig,
    a: &RatingsMatrix<T>,
    probe: Option<&ProbeSet>,
) -> Result<(FactorModel<T>, TrainReport)> {
    match config.variant {
        Variant::Ccd => ccd_train(config, a, probe),
        Variant::CcdPlusPlus => ccdpp_train(config, a, probe),
    }
}

fn eval<T: Scalar>(model: &FactorModel<T>, probe: Option<&ProbeSet>) -> Result<Option<f64>> {
    match probe {
        Some(p) if !p.is_empty() => Ok(Some(model::rmse(model, p)?)),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplet;

    fn one_by_one(a: f64) -> RatingsMatrix<f64> {
        RatingsMatrix::from_triplets(&[Triplet::new(0, 0, a)], 1, 1).unwrap()
    }

    #[test]
    fn z_star_degenerate_and_scalar_cases() {
        let a = RatingsMatrix::from_triplets(&[Triplet::new(1, 0, 2.0)], 2, 1).unwrap();
        let r = a.residual();
        let mut model = FactorModel::new(2, 1, 1).unwrap();
        assert_eq!(ccd_z_star(0, 0, &r, &model, 0.1).unwrap(), 0.0);
        assert_eq!(ccd_z_star(0, 0, &r, &model, 0.0).unwrap(), 0.0);
        // R = 2, w = 0, h = 1, lambda = 0 -> z = 2
        model.h_mut()[0] = 1.0;
        assert_eq!(ccd_z_star(1, 0, &r, &model, 0.0).unwrap(), 2.0);
        assert_eq!(ccd_s_star(0, 0, &r, &model, 0.0).unwrap(), 0.0);
        let mut model2 = FactorModel::new(2, 1, 1).unwrap();
        model2.w_mut()[1] = 1.0;
        assert_eq!(ccd_s_star(0, 0, &r, &model2, 0.0).unwrap(), 2.0);
        assert!(ccd_z_star(0, 1, &r, &model, 0.0).is_err());
        assert!(ccd_z_star(2, 0, &r, &model, 0.0).is_err());
    }

    #[test]
    fn apply_with_unchanged_value_is_a_no_op() {
        let a = one_by_one(3.0);
        let mut r = a.residual();
        let mut model = FactorModel::new(1, 1, 1).unwrap();
        model.h_mut()[0] = 0.5;
        ccd_apply_z(0, 0, 0.0, &mut r, &mut model).unwrap();
        assert_eq!(r.row_values(), &[3.0]);
        ccd_apply_s(0, 0, 0.5, &mut r, &mut model).unwrap();
        assert_eq!(r.col_values(), &[3.0]);
    }

    #[test]
    fn cold_start_stays_at_zero() {
        let a = one_by_one(4.0);
        let mut r = a.residual();
        let mut model = FactorModel::new(1, 1, 1).unwrap();
        ccd_epoch(&mut model, &mut r, 0.0).unwrap();
        assert_eq!(model.w(), &[0.0]);
        assert_eq!(model.h(), &[0.0]);
        assert_eq!(r.row_values(), &[4.0]);
    }

    #[test]
    fn warm_start_hand_iteration() {
        // H = 1: z = 4 -> W = 4, R = 0; then s = (0 + 4*1)*4 / 16 = 1
        let a = one_by_one(4.0);
        let mut r = a.residual();
        let mut model = FactorModel::new(1, 1, 1).unwrap();
        model.h_mut()[0] = 1.0;
        ccd_epoch(&mut model, &mut r, 0.0).unwrap();
        assert_eq!(model.w(), &[4.0]);
        assert_eq!(model.h(), &[1.0]);
        assert_eq!(r.row_values(), &[0.0]);
        assert!(r.layouts_agree());
    }

    #[test]
    fn rhat_and_writeback_single_entry() {
        let a = one_by_one(1.0);
        let rt = Runtime::sequential();
        let sched = Schedule::uniform(&a, &rt);
        let mut r = a.residual();
        ccdpp_build_rhat(&mut r, &[0.0], &[3.0], &sched, &rt);
        assert_eq!(r.row_values(), &[1.0]);
        ccdpp_build_rhat(&mut r, &[2.0], &[3.0], &sched, &rt);
        assert_eq!(r.row_values(), &[7.0]);
        assert_eq!(r.col_values(), &[7.0]);

        let mut model = FactorModel::new(1, 1, 2).unwrap();
        ccdpp_writeback(&[2.0], &[3.0], &mut model, 1, &mut r, &sched, &rt);
        assert_eq!(r.row_values(), &[1.0]);
        assert_eq!(r.col_values(), &[1.0]);
        assert_eq!(model.w(), &[0.0, 2.0]);
        assert_eq!(model.h(), &[0.0, 3.0]);

        ccdpp_writeback(&[0.0], &[0.0], &mut model, 1, &mut r, &sched, &rt);
        assert_eq!(r.row_values(), &[1.0]);
        assert_eq!(model.w(), &[0.0, 0.0]);
    }

    #[test]
    fn rank_one_updates_scalar_cases() {
        let rt = Runtime::sequential();
        let a = RatingsMatrix::from_triplets(&[Triplet::new(0, 0, 6.0), Triplet::new(1, 1, 5.0)], 2, 2).unwrap();
        let r = a.residual();
        let sched = Schedule::uniform(&a, &rt);
        // v = 0, lambda > 0 -> u = 0
        let mut u = vec![9.0, 9.0];
        ccdpp_update_u(&r, &mut u, &[0.0, 0.0], 0.1, &sched.rows, &rt);
        assert_eq!(u, vec![0.0, 0.0]);
        // R_hat = 6, v = 2, lambda = 0 -> u = 12 / 4 = 3
        ccdpp_update_u(&r, &mut u, &[2.0, 0.0], 0.0, &sched.rows, &rt);
        assert_eq!(u[0], 3.0);
        assert_eq!(u[1], 0.0);
        let mut v = vec![9.0, 9.0];
        ccdpp_update_v(&r, &[0.0, 0.0], &mut v, 0.1, &sched.cols, &rt);
        assert_eq!(v, vec![0.0, 0.0]);
        ccdpp_update_v(&r, &[2.0, 0.0], &mut v, 0.0, &sched.cols, &rt);
        assert_eq!(v, vec![3.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(CcdConfig::default().validate().is_ok());
        assert!(CcdConfig { inner_iters: 0, ..CcdConfig::default() }.validate().is_err());
        assert!(CcdConfig { lambda: -1.0, ..CcdConfig::default() }.validate().is_err());
        assert!(CcdConfig { lambda: 0.0, ..CcdConfig::default() }.validate().is_ok());
    }
}
