//! Bulk-synchronous execution over static contiguous partitions.
//!
//! Every parallel step in the solvers is a *stage*: a kernel applied once to
//! each index of a [`Partition`], where worker `r` owns a contiguous block of
//! indices and the matching contiguous block of an output buffer. A stage
//! returns only after every worker has finished, which is the barrier between
//! phases. Partitions are fixed ahead of time, so results never depend on the
//! order in which workers happen to run.
//!
//! Stages also carry explicit buffer transfers (see [`StagePlan`]) that mirror
//! host/device copies. Execution is host-only; the transfers are bookkeeping
//! that records which buffers a stage needs and how many bytes move.

use std::ops::Range;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::SparsePattern;

/// Assignment of `count` indices to `p` workers as contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    bounds: Vec<usize>,
}

impl Partition {
    /// Builds a partition from block boundaries `0 = b_0 <= ... <= b_p = count`.
    pub fn from_bounds(bounds: Vec<usize>) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != 0 || bounds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parameter(format!("invalid partition bounds {bounds:?}")));
        }
        Ok(Partition { bounds })
    }

    pub fn workers(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Number of indices covered.
    pub fn len(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    /// Indices owned by worker `r`.
    pub fn block(&self, r: usize) -> Range<usize> {
        self.bounds[r]..self.bounds[r + 1]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Worker id for index `i`.
    pub fn owner(&self, i: usize) -> Option<usize> {
        if i >= self.len() {
            return None;
        }
        // last block whose start is <= i and which is non-empty
        let r = self.bounds.partition_point(|&b| b <= i) - 1;
        Some(r)
    }

    /// Worker id of every index.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.workers() {
            out.extend(std::iter::repeat(r).take(self.bounds[r + 1] - self.bounds[r]));
        }
        out
    }

    /// Largest per-worker cost under `costs`.
    pub fn bottleneck(&self, costs: &WorkModel) -> u64 {
        (0..self.workers())
            .map(|r| costs.costs[self.block(r)].iter().sum::<u64>())
            .max()
            .unwrap_or(0)
    }
}

/// Per-index work estimate in arithmetic-operation units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkModel {
    costs: Vec<u64>,
}

impl WorkModel {
    pub fn new(costs: Vec<u64>) -> Self {
        WorkModel { costs }
    }

    /// `4 |Omega_i|` for each row of the pattern.
    pub fn rows(p: &SparsePattern) -> Self {
        WorkModel::new((0..p.rows()).map(|i| 4 * p.row_len(i) as u64).collect())
    }

    /// `4 |Omega_j|` for each column of the pattern.
    pub fn cols(p: &SparsePattern) -> Self {
        WorkModel::new((0..p.cols()).map(|j| 4 * p.col_len(j) as u64).collect())
    }

    pub fn costs(&self) -> &[u64] {
        &self.costs
    }

    pub fn total(&self) -> u64 {
        self.costs.iter().sum()
    }
}

/// Blocks of size `ceil(count/p)` for the first `count % p` workers and
/// `floor(count/p)` for the rest. Workers beyond `count` get empty blocks.
pub fn partition_uniform(count: usize, p: usize) -> Result<Partition> {
    if p == 0 {
        return Err(Error::Parameter("worker count must be at least 1".into()));
    }
    let base = count / p;
    let extra = count % p;
    let mut bounds = Vec::with_capacity(p + 1);
    bounds.push(0);
    for r in 0..p {
        let size = base + usize::from(r < extra);
        bounds.push(bounds[r] + size);
    }
    Ok(Partition { bounds })
}

/// Contiguous partition minimizing the largest per-worker cost.
///
/// Worker `r` receives the longest prefix of the remaining indices whose cost
/// stays within the optimal bottleneck for the remaining suffix and workers.
/// With equal costs this yields exactly the [`partition_uniform`] blocks.
pub fn partition_balanced(costs: &WorkModel, p: usize) -> Result<Partition> {
    if p == 0 {
        return Err(Error::Parameter("worker count must be at least 1".into()));
    }
    let c = &costs.costs;
    let mut bounds = Vec::with_capacity(p + 1);
    bounds.push(0);
    let mut start = 0;
    for r in 0..p {
        let remaining = p - r;
        let limit = min_bottleneck(&c[start..], remaining);
        let mut end = start;
        let mut acc = 0u64;
        while end < c.len() && acc + c[end] <= limit {
            acc += c[end];
            end += 1;
        }
        if r == p - 1 {
            end = c.len();
        }
        bounds.push(end);
        start = end;
    }
    Ok(Partition { bounds })
}

/// Smallest `B` such that `costs` splits into at most `p` contiguous blocks
/// each costing at most `B`.
fn min_bottleneck(costs: &[u64], p: usize) -> u64 {
    let fits = |limit: u64| -> bool {
        let mut blocks = 1;
        let mut acc = 0u64;
        for &x in costs {
            if x > limit {
                return false;
            }
            if acc + x > limit {
                blocks += 1;
                acc = x;
                if blocks > p {
                    return false;
                }
            } else {
                acc += x;
            }
        }
        true
    };
    let mut lo = costs.iter().copied().max().unwrap_or(0);
    let mut hi = costs.iter().sum::<u64>();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// How a stage's output buffer is divided among indices.
#[derive(Clone, Copy, Debug)]
pub enum Layout<'a> {
    /// Index `i` owns `out[i * width .. (i + 1) * width]`.
    Strided(usize),
    /// Index `i` owns `out[offsets[i] .. offsets[i + 1]]`.
    Offsets(&'a [usize]),
}

impl Layout<'_> {
    fn start(&self, i: usize) -> usize {
        match *self {
            Layout::Strided(w) => i * w,
            Layout::Offsets(o) => o[i],
        }
    }

    fn check(&self, count: usize, len: usize) -> Result<()> {
        let expected = match *self {
            Layout::Strided(w) => count * w,
            Layout::Offsets(o) => {
                if o.len() != count + 1 || o[0] != 0 {
                    return Err(Error::Dimension(format!(
                        "{} offsets for {count} indices",
                        o.len()
                    )));
                }
                o[count]
            }
        };
        if expected != len {
            return Err(Error::Dimension(format!(
                "stage buffer holds {len} values, layout expects {expected}"
            )));
        }
        Ok(())
    }
}

/// A kernel failure, tagged with where it happened.
#[derive(Debug, PartialEq)]
pub struct StageError<E> {
    pub worker: usize,
    pub index: usize,
    pub source: E,
}

impl<E: std::fmt::Display> std::fmt::Display for StageError<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "worker {} failed at index {}: {}", self.worker, self.index, self.source)
    }
}

impl<E: std::fmt::Debug + std::fmt::Display> std::error::Error for StageError<E> {}

/// Named buffer moved across a stage boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub buffer: &'static str,
    pub bytes: u64,
}

impl Transfer {
    pub fn new(buffer: &'static str, bytes: u64) -> Self {
        Transfer { buffer, bytes }
    }
}

/// One step of a staged schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub name: &'static str,
    pub transfer_in: Vec<Transfer>,
    pub uses: Vec<&'static str>,
    pub transfer_out: Vec<Transfer>,
}

impl Stage {
    pub fn new(name: &'static str) -> Self {
        Stage {
            name,
            transfer_in: Vec::new(),
            uses: Vec::new(),
            transfer_out: Vec::new(),
        }
    }

    pub fn copy_in(mut self, buffer: &'static str, bytes: u64) -> Self {
        self.transfer_in.push(Transfer::new(buffer, bytes));
        self
    }

    pub fn uses(mut self, buffers: &[&'static str]) -> Self {
        self.uses.extend_from_slice(buffers);
        self
    }

    pub fn copy_out(mut self, buffer: &'static str, bytes: u64) -> Self {
        self.transfer_out.push(Transfer::new(buffer, bytes));
        self
    }

    pub fn bytes_in(&self) -> u64 {
        self.transfer_in.iter().map(|t| t.bytes).sum()
    }

    pub fn bytes_out(&self) -> u64 {
        self.transfer_out.iter().map(|t| t.bytes).sum()
    }
}

/// Ordered stages; every buffer a stage uses or copies out must have been
/// copied in by that stage or an earlier one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StagePlan {
    stages: Vec<Stage>,
}

impl StagePlan {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        let plan = StagePlan { stages };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let mut resident: Vec<&str> = Vec::new();
        for stage in &self.stages {
            if self.stages.iter().filter(|s| s.name == stage.name).count() > 1 {
                return Err(Error::Parameter(format!("duplicate stage `{}`", stage.name)));
            }
            resident.extend(stage.transfer_in.iter().map(|t| t.buffer));
            let needed = stage.uses.iter().copied().chain(stage.transfer_out.iter().map(|t| t.buffer));
            for buf in needed {
                if !resident.contains(&buf) {
                    return Err(Error::Parameter(format!(
                        "stage `{}` touches `{buf}` before it is transferred in",
                        stage.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, name: &str) -> &Stage {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no stage named `{name}` in plan"))
    }
}

/// Accumulated timing for one stage name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub calls: u64,
    pub seconds: f64,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

/// Per-stage timings plus total wall time since creation.
#[derive(Clone, Debug)]
pub struct StageLog {
    started: Instant,
    records: Vec<StageRecord>,
}

impl Default for StageLog {
    fn default() -> Self {
        Self::new()
    }
}

impl StageLog {
    pub fn new() -> Self {
        StageLog {
            started: Instant::now(),
            records: Vec::new(),
        }
    }

    pub fn record(&mut self, stage: &Stage, elapsed: Duration) {
        let rec = match self.records.iter_mut().find(|r| r.name == stage.name) {
            Some(r) => r,
            None => {
                self.records.push(StageRecord {
                    name: stage.name,
                    calls: 0,
                    seconds: 0.0,
                    bytes_in: 0,
                    bytes_out: 0,
                });
                self.records.last_mut().unwrap()
            }
        };
        rec.calls += 1;
        rec.seconds += elapsed.as_secs_f64();
        rec.bytes_in += stage.bytes_in();
        rec.bytes_out += stage.bytes_out();
    }

    pub fn records(&self) -> &[StageRecord] {
        &self.records
    }

    pub fn stage_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }
}

/// Worker pool that executes stages.
pub struct Runtime {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime").field("workers", &self.workers).finish()
    }
}

/// Hardware parallelism, or 1 if unknown.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Runtime {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Parameter("worker count must be at least 1".into()));
        }
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("pmf-worker-{i}"))
                .build()
                .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
            Some(pool)
        } else {
            None
        };
        Ok(Runtime { workers, pool })
    }

    pub fn sequential() -> Self {
        Runtime { workers: 1, pool: None }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn uniform(&self, count: usize) -> Partition {
        partition_uniform(count, self.workers).expect("workers >= 1")
    }

    pub fn balanced(&self, costs: &WorkModel) -> Partition {
        partition_balanced(costs, self.workers).expect("workers >= 1")
    }

    /// Applies `kernel(i, out_i)` once for every index `i` of `partition`,
    /// where `out_i` is index `i`'s region of `out` under `layout`. Returns
    /// after all workers finish. On failure, each worker stops at its first
    /// error and the error from the lowest worker id is returned.
    pub fn run_stage<T, E, F>(
        &self,
        partition: &Partition,
        out: &mut [T],
        layout: Layout<'_>,
        kernel: F,
    ) -> std::result::Result<Duration, StageError<E>>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut [T]) -> std::result::Result<(), E> + Sync,
    {
        let count = partition.len();
        if let Err(e) = layout.check(count, out.len()) {
            panic!("stage layout mismatch: {e}");
        }
        let started = Instant::now();
        let p = partition.workers();

        let mut chunks: Vec<&mut [T]> = Vec::with_capacity(p);
        let mut rest = out;
        for r in 0..p {
            let block = partition.block(r);
            let len = layout.start(block.end) - layout.start(block.start);
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            chunks.push(head);
            rest = tail;
        }

        let run_block = |r: usize, chunk: &mut [T]| -> std::result::Result<(), StageError<E>> {
            let block = partition.block(r);
            let base = layout.start(block.start);
            for i in block {
                let lo = layout.start(i) - base;
                let hi = layout.start(i + 1) - base;
                kernel(i, &mut chunk[lo..hi]).map_err(|source| StageError {
                    worker: r,
                    index: i,
                    source,
                })?;
            }
            Ok(())
        };

        let mut results: Vec<std::result::Result<(), StageError<E>>> = (0..p).map(|_| Ok(())).collect();
        match &self.pool {
            Some(pool) if p > 1 => pool.scope(|s| {
                for (r, (chunk, slot)) in chunks.into_iter().zip(results.iter_mut()).enumerate() {
                    let run_block = &run_block;
                    s.spawn(move |_| *slot = run_block(r, chunk));
                }
            }),
            _ => {
                for (r, (chunk, slot)) in chunks.into_iter().zip(results.iter_mut()).enumerate() {
                    *slot = run_block(r, chunk);
                }
            }
        }
        let elapsed = started.elapsed();
        for res in results {
            res?;
        }
        Ok(elapsed)
    }

    /// [`run_stage`](Self::run_stage) for kernels that cannot fail.
    pub fn run<T, F>(&self, partition: &Partition, out: &mut [T], layout: Layout<'_>, kernel: F) -> Duration
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync,
    {
        match self.run_stage::<T, std::convert::Infallible, _>(partition, out, layout, |i, o| {
            kernel(i, o);
            Ok(())
        }) {
            Ok(d) => d,
            Err(e) => match e.source {},
        }
    }

    /// Runs a stage and records it, with its transfers, in `log`.
    pub fn execute<T, E, F>(
        &self,
        stage: &Stage,
        log: &mut StageLog,
        partition: &Partition,
        out: &mut [T],
        layout: Layout<'_>,
        kernel: F,
    ) -> std::result::Result<(), StageError<E>>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut [T]) -> std::result::Result<(), E> + Sync,
    {
        let elapsed = self.run_stage(partition, out, layout, kernel)?;
        log.record(stage, elapsed);
        Ok(())
    }

    /// Records a transfer-only stage (no kernel).
    pub fn transfer(&self, stage: &Stage, log: &mut StageLog) {
        log.record(stage, Duration::ZERO);
    }

    /// Per-worker partials folded over each block in index order, then
    /// combined in worker-id order.
    pub fn reduce<A, I, F, C>(&self, partition: &Partition, init: I, fold: F, combine: C) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, usize) + Sync,
        C: Fn(&mut A, A),
    {
        let p = partition.workers();
        let mut partials: Vec<A> = (0..p).map(|_| init()).collect();
        let fold_block = |r: usize, acc: &mut A| {
            for i in partition.block(r) {
                fold(acc, i);
            }
        };
        match &self.pool {
            Some(pool) if p > 1 => pool.scope(|s| {
                for (r, acc) in partials.iter_mut().enumerate() {
                    let fold_block = &fold_block;
                    s.spawn(move |_| fold_block(r, acc));
                }
            }),
            _ => {
                for (r, acc) in partials.iter_mut().enumerate() {
                    fold_block(r, acc);
                }
            }
        }
        let mut it = partials.into_iter();
        let mut total = it.next().unwrap_or_else(&init);
        for part in it {
            combine(&mut total, part);
        }
        total
    }
}

/// Parallel time over sequential time, `t_seq / t_par`.
pub fn speedup(seconds_sequential: f64, seconds_parallel: f64) -> Result<f64> {
    if !(seconds_parallel > 0.0) || !seconds_parallel.is_finite() {
        return Err(Error::Measurement(format!(
            "parallel time must be positive, got {seconds_parallel}"
        )));
    }
    if !(seconds_sequential >= 0.0) {
        return Err(Error::Measurement(format!(
            "sequential time must be non-negative, got {seconds_sequential}"
        )));
    }
    Ok(seconds_sequential / seconds_parallel)
}
