//! Per-iteration training metrics.

use serde::Serialize;

use crate::runtime::StageRecord;
use crate::scalar::Precision;

/// One row per outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Training wall time for this iteration, evaluation excluded.
    pub seconds: f64,
    pub objective: f64,
    pub rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub algorithm: String,
    pub workers: usize,
    pub precision: Precision,
    pub iterations: Vec<IterationRecord>,
    pub stages: Vec<StageRecord>,
}

impl TrainReport {
    pub fn new(algorithm: &str, workers: usize, precision: Precision) -> Self {
        TrainReport {
            algorithm: algorithm.to_string(),
            workers,
            precision,
            iterations: Vec::new(),
            stages: Vec::new(),
        }
    }

    pub fn push(&mut self, seconds: f64, objective: f64, rmse: Option<f64>) {
        self.iterations.push(IterationRecord {
            iteration: self.iterations.len() + 1,
            seconds,
            objective,
            rmse,
        });
    }

    pub fn train_seconds(&self) -> f64 {
        self.iterations.iter().map(|r| r.seconds).sum()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.objective)
    }

    pub fn final_rmse(&self) -> Option<f64> {
        self.iterations.last().and_then(|r| r.rmse)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.objective).collect()
    }
}
