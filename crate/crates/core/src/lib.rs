//! Parallel matrix factorization for collaborative filtering.
//!
//! Factorizes a sparse `m x n` rating matrix `A` into user factors `W`
//! (`m x k`) and item factors `H` (`n x k`) by minimizing
//!
//! ```text
//! sum_{(i,j) observed} (A_ij - w_i . h_j)^2 + lambda (||W||_F^2 + ||H||_F^2)
//! ```
//!
//! with alternating least squares ([`als`]), element-wise coordinate descent
//! and feature-wise rank-one coordinate descent ([`ccd`]). Parallel variants
//! run as bulk-synchronous stages on a [`runtime::Runtime`] and produce the
//! same bits for any worker count.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*32`/`*64` aliases below name the concrete instantiations.

pub mod als;
pub mod ccd;
pub mod dense;
pub mod error;
pub mod model;
pub mod report;
pub mod runtime;
pub mod scalar;
pub mod sparse;
pub mod sum;

pub use error::{Error, Result};
pub use model::{objective, rmse, AnyModel, FactorModel, ProbeSet};
pub use report::{IterationRecord, TrainReport};
pub use runtime::{Partition, Runtime, WorkModel};
pub use scalar::{Precision, Scalar};
pub use sparse::{RatingsMatrix, ResidualMatrix, SparsePattern, Triplet};

pub type RatingsMatrix32 = RatingsMatrix<f32>;
pub type RatingsMatrix64 = RatingsMatrix<f64>;
pub type ResidualMatrix32 = ResidualMatrix<f32>;
pub type ResidualMatrix64 = ResidualMatrix<f64>;
pub type FactorModel32 = FactorModel<f32>;
pub type FactorModel64 = FactorModel<f64>;
pub type SmallMatrix32 = dense::SmallMatrix<f32>;
pub type SmallMatrix64 = dense::SmallMatrix<f64>;
