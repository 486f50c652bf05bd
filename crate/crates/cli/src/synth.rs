//! Seeded synthetic rating data.
//!
//! Ratings follow `mu + b_u + b_i + p_u . q_i + noise`, optionally rounded
//! and clamped to the 1..=5 star scale. User activity and item popularity are
//! log-normal so the per-row and per-column counts are skewed the way real
//! rating data is.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use pmf_core::Triplet;

use crate::io::RawRating;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    /// Every user gets at least this many ratings.
    pub min_per_user: usize,
    pub rank: usize,
    pub mean: f64,
    pub user_bias: f64,
    pub item_bias: f64,
    /// Standard deviation of `p_u . q_i`.
    pub signal: f64,
    pub noise: f64,
    /// Log-normal sigma of user activity; 0 spreads ratings evenly.
    pub activity_skew: f64,
    /// Log-normal sigma of item popularity; 0 samples items uniformly.
    pub popularity_skew: f64,
    /// Round to whole stars in 1..=5.
    pub stars: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Shaped like MovieLens 100k: 943 users, 1682 items, 100,000 ratings,
    /// at least 20 per user, whole stars.
    pub fn movielens_100k(seed: u64) -> Self {
        SyntheticSpec {
            users: 943,
            items: 1682,
            ratings: 100_000,
            min_per_user: 20,
            rank: 3,
            mean: 3.5,
            user_bias: 0.45,
            item_bias: 0.55,
            signal: 0.5,
            noise: 0.85,
            activity_skew: 0.9,
            popularity_skew: 1.1,
            stars: true,
            seed,
        }
    }

    /// One million ratings over 20,000 users and 5,000 items.
    pub fn one_million(seed: u64) -> Self {
        SyntheticSpec {
            users: 20_000,
            items: 5_000,
            ratings: 1_000_000,
            min_per_user: 10,
            activity_skew: 0.5,
            popularity_skew: 0.0,
            ..Self::movielens_100k(seed)
        }
    }

    /// Ten thousand ratings over 500 users and 300 items.
    pub fn ten_thousand(seed: u64) -> Self {
        SyntheticSpec {
            users: 500,
            items: 300,
            ratings: 10_000,
            min_per_user: 5,
            ..Self::movielens_100k(seed)
        }
    }

    fn per_user_counts(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let base = self.min_per_user.min(self.items);
        let spare = self.ratings.saturating_sub(base * self.users);
        let weights: Vec<f64> = if self.activity_skew > 0.0 {
            let d = LogNormal::new(0.0, self.activity_skew).expect("valid sigma");
            (0..self.users).map(|_| d.sample(rng)).collect()
        } else {
            vec![1.0; self.users]
        };
        let total: f64 = weights.iter().sum();
        let mut counts: Vec<usize> = weights.iter().map(|w| base + (spare as f64 * w / total) as usize).collect();
        let mut short = self.ratings.saturating_sub(counts.iter().sum());
        for idx in (0..self.users).cycle().take(self.users * 2) {
            if short == 0 {
                break;
            }
            counts[idx] += 1;
            short -= 1;
        }
        counts.iter_mut().for_each(|c| *c = (*c).min(self.items));
        counts
    }

    /// Ratings with 1-based user and item IDs, users in ascending order.
    pub fn generate(&self) -> Vec<RawRating> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let factor_sd = (self.signal / (self.rank.max(1) as f64).sqrt()).sqrt();
        let draw = |len: usize, sd: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..len).map(|_| sd * unit.sample(rng)).collect()
        };
        let bu = draw(self.users, self.user_bias, &mut rng);
        let bi = draw(self.items, self.item_bias, &mut rng);
        let p = draw(self.users * self.rank, factor_sd, &mut rng);
        let q = draw(self.items * self.rank, factor_sd, &mut rng);
        let popularity: Vec<f64> = if self.popularity_skew > 0.0 {
            let d = LogNormal::new(0.0, self.popularity_skew).expect("valid sigma");
            (0..self.items).map(|_| d.sample(&mut rng)).collect()
        } else {
            Vec::new()
        };
        let counts = self.per_user_counts(&mut rng);

        let mut out = Vec::with_capacity(self.ratings);
        for (u, &count) in counts.iter().enumerate() {
            let mut items: Vec<usize> = if popularity.is_empty() {
                index::sample(&mut rng, self.items, count).into_vec()
            } else {
                index::sample_weighted(&mut rng, self.items, |j| popularity[j], count)
                    .expect("positive weights")
                    .into_vec()
            };
            items.sort_unstable();
            for i in items {
                let mut r = self.mean + bu[u] + bi[i] + self.noise * unit.sample(&mut rng);
                for t in 0..self.rank {
                    r += p[u * self.rank + t] * q[i * self.rank + t];
                }
                if self.stars {
                    r = r.round().clamp(1.0, 5.0);
                }
                out.push(RawRating { user: u as u64 + 1, item: i as u64 + 1, rating: r });
            }
        }
        out
    }
}

/// Fully observed `m x n` matrix `W H^T` with `W`, `H` entries uniform in
/// [-1, 1), as 0-based triplets.
pub fn planted_full(m: usize, n: usize, k: usize, seed: u64) -> Vec<Triplet<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let r = (0..k).map(|t| w[i * k + t] * h[j * k + t]).sum();
            out.push(Triplet::new(i, j, r));
        }
    }
    out
}
