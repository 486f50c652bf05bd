#![allow(dead_code)]

use pmf_core::{FactorModel, RatingsMatrix, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `m x n` ratings in [1, 5] at roughly the given density, with at
/// least one entry.
pub fn random_ratings(m: usize, n: usize, density: f64, seed: u64) -> RatingsMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool(density) {
                t.push(Triplet::new(i, j, rng.gen_range(1.0..5.0)));
            }
        }
    }
    if t.is_empty() {
        t.push(Triplet::new(0, 0, 3.0));
    }
    RatingsMatrix::from_triplets(&t, m, n).unwrap()
}

/// Dense copy with `None` for unobserved cells.
pub fn dense(a: &RatingsMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    let mut d = vec![vec![None; a.cols()]; a.rows()];
    for t in a.triplets() {
        d[t.user][t.item] = Some(t.rating);
    }
    d
}

/// `max |R_ij - (A_ij - w_i . h_j)|` recomputed from scratch.
pub fn residual_drift(a: &RatingsMatrix<f64>, model: &FactorModel<f64>, r: &pmf_core::ResidualMatrix<f64>) -> f64 {
    let fresh: Vec<f64> = a
        .triplets()
        .map(|t| {
            let mut p = 0.0;
            for (x, y) in model.user(t.user).iter().zip(model.item(t.item)) {
                p += x * y;
            }
            t.rating - p
        })
        .collect();
    fresh
        .iter()
        .zip(r.row_values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Minimizes a convex 1-D function by bisecting on the sign of the symmetric
/// difference `f(z + d) - f(z - d)`.
pub fn bracket_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let d = 1e-3;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid + d) - f(mid - d) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
