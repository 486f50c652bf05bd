//! Latent-factor model: storage, initialization and evaluation.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_index, Error, Result};
use crate::scalar::{dot, dot_f64, Precision, Scalar};
use crate::sparse::{RatingsMatrix, Triplet};
use crate::sum::ExactSum;

/// User factors `W` (`m x k`) and item factors `H` (`n x k`), both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    m: usize,
    n: usize,
    k: usize,
    w: Vec<T>,
    h: Vec<T>,
}

impl<T: Scalar> FactorModel<T> {
    /// All-zero model.
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("rank k must be at least 1".into()));
        }
        Ok(FactorModel {
            m,
            n,
            k,
            w: vec![T::zero(); m * k],
            h: vec![T::zero(); n * k],
        })
    }

    /// Wraps existing row-major factor buffers.
    pub fn from_parts(m: usize, n: usize, k: usize, w: Vec<T>, h: Vec<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("rank k must be at least 1".into()));
        }
        if w.len() != m * k || h.len() != n * k {
            return Err(Error::Dimension(format!(
                "factor buffers of length {}/{} for {m} x {n} at rank {k}",
                w.len(),
                h.len()
            )));
        }
        Ok(FactorModel { m, n, k, w, h })
    }

    pub fn users(&self) -> usize {
        self.m
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn h(&self) -> &[T] {
        &self.h
    }

    pub fn w_mut(&mut self) -> &mut [T] {
        &mut self.w
    }

    pub fn h_mut(&mut self) -> &mut [T] {
        &mut self.h
    }

    /// Both factor buffers at once, for solvers that read one while writing the other.
    pub fn factors_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.w, &mut self.h)
    }

    #[inline]
    pub fn user(&self, i: usize) -> &[T] {
        &self.w[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn item(&self, j: usize) -> &[T] {
        &self.h[j * self.k..(j + 1) * self.k]
    }

    /// Column `t` of `W`.
    pub fn user_column(&self, t: usize) -> Vec<T> {
        self.w.iter().skip(t).step_by(self.k).copied().collect()
    }

    /// Column `t` of `H`.
    pub fn item_column(&self, t: usize) -> Vec<T> {
        self.h.iter().skip(t).step_by(self.k).copied().collect()
    }

    pub fn check_matches(&self, a: &RatingsMatrix<T>) -> Result<()> {
        if a.rows() != self.m || a.cols() != self.n {
            return Err(Error::Dimension(format!(
                "model is {} x {} but ratings are {} x {}",
                self.m,
                self.n,
                a.rows(),
                a.cols()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.h).all(|x| x.is_finite())
    }

    /// `w_i . h_j`, unclamped.
    pub fn predict(&self, i: usize, j: usize) -> Result<T> {
        check_index("user", i, self.m)?;
        check_index("item", j, self.n)?;
        Ok(dot(self.user(i), self.item(j)))
    }

    /// Squared Frobenius norms `||W||^2 + ||H||^2`, summed exactly.
    pub fn squared_norm(&self) -> f64 {
        let s: ExactSum = self
            .w
            .iter()
            .chain(&self.h)
            .map(|x| {
                let x = x.as_f64();
                x * x
            })
            .collect();
        s.value()
    }

    /// Items ranked by predicted score for user `i`, skipping `exclude`.
    /// Ties go to the lower item index.
    pub fn top_n(&self, i: usize, count: usize, exclude: &[usize]) -> Result<Vec<(usize, T)>> {
        check_index("user", i, self.m)?;
        if count == 0 {
            return Err(Error::Parameter("count must be at least 1".into()));
        }
        let mut skip = vec![false; self.n];
        for &j in exclude {
            check_index("item", j, self.n)?;
            skip[j] = true;
        }
        let wi = self.user(i);
        let mut scored: Vec<(usize, T)> = (0..self.n)
            .filter(|&j| !skip[j])
            .map(|j| (j, dot(wi, self.item(j))))
            .collect();
        scored.sort_by(|a, b| b.1.as_f64().total_cmp(&a.1.as_f64()).then(a.0.cmp(&b.0)));
        scored.truncate(count);
        Ok(scored)
    }
}

/// Fills `H` with i.i.d. uniform draws in `(0, 1/sqrt(k)]` and zeroes `W`.
pub fn init_als<T: Scalar>(model: &mut FactorModel<T>, seed: u64) {
    model.w.fill(T::zero());
    fill_small_random(&mut model.h, model.k, seed);
}

/// Coordinate-descent start: `W = 0` (so `R = A`), `H` random as in [`init_als`].
pub fn init_ccd<T: Scalar>(model: &mut FactorModel<T>, seed: u64) {
    model.w.fill(T::zero());
    fill_small_random(&mut model.h, model.k, seed);
}

fn fill_small_random<T: Scalar>(buf: &mut [T], k: usize, seed: u64) {
    let bound = 1.0 / (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in buf.iter_mut() {
        // gen() is in [0, 1); flip it to (0, 1]
        let u: f64 = rng.gen();
        *x = T::of((1.0 - u) * bound);
    }
}

/// Held-out ratings used only for evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSet {
    entries: Vec<Triplet<f64>>,
}

impl ProbeSet {
    pub fn new(entries: Vec<Triplet<f64>>) -> Self {
        ProbeSet { entries }
    }

    pub fn entries(&self) -> &[Triplet<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails if any entry falls outside an `m x n` matrix.
    pub fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        for t in &self.entries {
            if t.user >= m || t.item >= n {
                return Err(Error::Dimension(format!(
                    "probe entry ({}, {}) outside {m} x {n}",
                    t.user, t.item
                )));
            }
        }
        Ok(())
    }

    /// Mean rating, used by the global-mean baseline.
    pub fn mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let s: ExactSum = self.entries.iter().map(|t| t.rating).collect();
        Some(s.value() / self.entries.len() as f64)
    }
}

/// Regularized squared error over the observed entries:
/// `sum (A_ij - w_i . h_j)^2 + lambda (||W||_F^2 + ||H||_F^2)`.
///
/// Evaluated in double precision with exact summation, so the value does not
/// depend on entry order.
pub fn objective<T: Scalar>(model: &FactorModel<T>, a: &RatingsMatrix<T>, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    model.check_matches(a)?;
    let fit = squared_error(model, a);
    Ok(fit + lambda * model.squared_norm())
}

/// Data-fit term of the objective alone.
pub fn squared_error<T: Scalar>(model: &FactorModel<T>, a: &RatingsMatrix<T>) -> f64 {
    let p = a.pattern();
    let vals = a.row_values();
    let mut acc = ExactSum::new();
    for i in 0..a.rows() {
        let wi = model.user(i);
        for e in p.row_range(i) {
            let j = p.col_of()[e] as usize;
            let err = vals[e].as_f64() - dot_f64(wi, model.item(j));
            acc.add(err * err);
        }
    }
    acc.value()
}

/// Root mean squared error of raw predictions over the probe set.
pub fn rmse<T: Scalar>(model: &FactorModel<T>, probe: &ProbeSet) -> Result<f64> {
    if probe.is_empty() {
        return Err(Error::Evaluation("probe set is empty".into()));
    }
    probe.check_dims(model.m, model.n)?;
    let mut acc = ExactSum::new();
    for t in probe.entries() {
        let err = t.rating - dot_f64(model.user(t.user), model.item(t.item));
        acc.add(err * err);
    }
    Ok((acc.value() / probe.len() as f64).sqrt())
}

/// RMSE of predicting `mean` for every probe entry.
pub fn baseline_rmse(probe: &ProbeSet, mean: f64) -> Result<f64> {
    if probe.is_empty() {
        return Err(Error::Evaluation("probe set is empty".into()));
    }
    let s: ExactSum = probe
        .entries()
        .iter()
        .map(|t| (t.rating - mean) * (t.rating - mean))
        .collect();
    Ok((s.value() / probe.len() as f64).sqrt())
}

const MAGIC: &[u8; 8] = b"PMFMODEL";
const FORMAT_VERSION: u32 = 1;

/// A deserialized model of either precision.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Single(FactorModel<f32>),
    Double(FactorModel<f64>),
}

impl AnyModel {
    pub fn precision(&self) -> Precision {
        match self {
            AnyModel::Single(_) => Precision::Single,
            AnyModel::Double(_) => Precision::Double,
        }
    }

    pub fn rmse(&self, probe: &ProbeSet) -> Result<f64> {
        match self {
            AnyModel::Single(m) => rmse(m, probe),
            AnyModel::Double(m) => rmse(m, probe),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            AnyModel::Single(m) => (m.m, m.n, m.k),
            AnyModel::Double(m) => (m.m, m.n, m.k),
        }
    }
}

/// Binary layout, little-endian:
/// `"PMFMODEL"`, version `u32`, scalar width `u32` (4 or 8), `m`, `n`, `k`
/// as `u64`, then `W` and `H` row-major.
pub fn write_model<T: Scalar, W: Write>(model: &FactorModel<T>, mut out: W) -> Result<()> {
    let width = T::PRECISION.bytes();
    let mut buf = Vec::with_capacity(40 + (model.w.len() + model.h.len()) * width);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    for d in [model.m, model.n, model.k] {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in model.w.iter().chain(&model.h) {
        x.write_le(&mut buf);
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut input: R) -> Result<AnyModel> {
    let mut header = [0u8; 40];
    input
        .read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let width = u32_at(12);
    let (m, n, k) = (u64_at(16) as usize, u64_at(24) as usize, u64_at(32) as usize);
    match width {
        4 => read_body::<f32, _>(input, m, n, k).map(AnyModel::Single),
        8 => read_body::<f64, _>(input, m, n, k).map(AnyModel::Double),
        w => Err(Error::Format(format!("unsupported scalar width {w}"))),
    }
}

fn read_body<T: Scalar, R: Read>(mut input: R, m: usize, n: usize, k: usize) -> Result<FactorModel<T>> {
    let width = T::PRECISION.bytes();
    let count = m
        .checked_add(n)
        .and_then(|x| x.checked_mul(k))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * width {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * width,
            body.len()
        )));
    }
    let mut vals = body.chunks_exact(width).map(T::read_le);
    let w: Vec<T> = vals.by_ref().take(m * k).collect();
    let h: Vec<T> = vals.collect();
    FactorModel::from_parts(m, n, k, w, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn fixture() -> RatingsMatrix<f64> {
        let t = Triplet::new;
        RatingsMatrix::from_triplets(
            &[t(0, 0, 5.0), t(0, 2, 3.0), t(1, 1, 4.0), t(2, 0, 1.0)],
            3,
            3,
        )
        .unwrap()
    }

    #[test]
    fn als_init_is_seeded_and_bounded() {
        let mut a = FactorModel::<f64>::new(7, 11, 5).unwrap();
        let mut b = a.clone();
        init_als(&mut a, 42);
        init_als(&mut b, 42);
        assert_eq!(a.h(), b.h());
        let bound = 1.0 / 5f64.sqrt();
        assert!((bound - 0.44722).abs() < 1e-5);
        assert!(a.h().iter().all(|&x| x > 0.0 && x <= bound));
        assert!(a.w().iter().all(|&x| x == 0.0));
        let mut c = FactorModel::<f64>::new(7, 11, 5).unwrap();
        init_als(&mut c, 43);
        assert_ne!(a.h(), c.h());

        let mut f = FactorModel::<f32>::new(3, 40, 5).unwrap();
        init_als(&mut f, 1);
        assert!(f.h().iter().all(|&x| x > 0.0 && x <= 1.0 / 5f32.sqrt()));
    }

    #[test]
    fn ccd_init_predicts_zero_and_objective_is_sum_of_squares() {
        let a = fixture();
        let mut model = FactorModel::new(3, 3, 2).unwrap();
        init_ccd(&mut model, 9);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(model.predict(i, j).unwrap(), 0.0);
            }
        }
        let obj = objective(&model, &a, 0.0).unwrap();
        assert_eq!(obj, 25.0 + 9.0 + 16.0 + 1.0);
    }

    #[test]
    fn predict_cases() {
        let mut model = FactorModel::<f64>::new(2, 2, 1).unwrap();
        assert_eq!(model.predict(1, 1).unwrap(), 0.0);
        model.w_mut()[0] = 2.0;
        model.h_mut()[1] = 3.0;
        assert_eq!(model.predict(0, 1).unwrap(), 6.0);
        assert!(model.predict(2, 0).is_err());
        assert!(model.predict(0, 2).is_err());
    }

    #[test]
    fn objective_of_exact_factorization_vanishes() {
        let w = vec![1.0, 0.5, -0.25, 2.0, 0.75, 0.125];
        let h = vec![0.5, 1.5, -1.0, 0.25];
        let model = FactorModel::from_parts(3, 2, 2, w, h).unwrap();
        let trips: Vec<_> = [(0, 0), (0, 1), (1, 1), (2, 0)]
            .iter()
            .map(|&(i, j)| Triplet::new(i, j, dot_f64(model.user(i), model.item(j))))
            .collect();
        let a = RatingsMatrix::from_triplets(&trips, 3, 2).unwrap();
        assert_eq!(objective(&model, &a, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_scripted_value() {
        // W = [[1, 2], [0.5, -1], [0, 1]], H = [[1, 0], [2, 1], [-1, 0.5]]
        // predictions: (0,0)=1, (0,2)=0, (1,1)=0, (2,0)=0
        // squared errors: 16 + 9 + 16 + 1 = 42
        // ||W||^2 = 1+4+0.25+1+0+1 = 7.25, ||H||^2 = 1+0+4+1+1+0.25 = 7.25
        // 42 + 0.1 * 14.5 = 43.45
        let model = FactorModel::from_parts(
            3,
            3,
            2,
            vec![1.0, 2.0, 0.5, -1.0, 0.0, 1.0],
            vec![1.0, 0.0, 2.0, 1.0, -1.0, 0.5],
        )
        .unwrap();
        let obj = objective(&model, &fixture(), 0.1).unwrap();
        assert!((obj - 43.45).abs() < 1e-12, "{obj}");
        assert!(objective(&model, &fixture(), -0.1).is_err());
    }

    #[test]
    fn rmse_cases() {
        let mut model = FactorModel::<f64>::new(1, 1, 1).unwrap();
        model.w_mut()[0] = 1.0;
        model.h_mut()[0] = 2.0;
        let probe = ProbeSet::new(vec![Triplet::new(0, 0, 4.0)]);
        assert_eq!(rmse(&model, &probe).unwrap(), 2.0);
        let exact = ProbeSet::new(vec![Triplet::new(0, 0, 2.0)]);
        assert_eq!(rmse(&model, &exact).unwrap(), 0.0);
        assert!(matches!(rmse(&model, &ProbeSet::default()), Err(Error::Evaluation(_))));
        assert!(rmse(&model, &ProbeSet::new(vec![Triplet::new(1, 0, 1.0)])).is_err());
    }

    #[test]
    fn top_n_cases() {
        let zero = FactorModel::<f64>::new(1, 5, 2).unwrap();
        let top = zero.top_n(0, 3, &[1]).unwrap();
        assert_eq!(top.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 2, 3]);

        let model = FactorModel::from_parts(1, 3, 1, vec![1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(model.top_n(0, 2, &[]).unwrap(), vec![(2, 3.0), (1, 2.0)]);
        assert_eq!(model.top_n(0, 10, &[0, 2]).unwrap(), vec![(1, 2.0)]);
        assert!(model.top_n(1, 1, &[]).is_err());
        assert!(model.top_n(0, 0, &[]).is_err());
    }

    #[test]
    fn serialization_round_trips_bits() {
        let mut model = FactorModel::<f64>::new(4, 3, 2).unwrap();
        init_als(&mut model, 5);
        model.w_mut()[3] = -1.0 / 3.0;
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        assert_eq!(read_model(&buf[..]).unwrap(), AnyModel::Double(model.clone()));

        let mut single = FactorModel::<f32>::new(2, 2, 3).unwrap();
        init_als(&mut single, 8);
        let mut buf = Vec::new();
        write_model(&single, &mut buf).unwrap();
        assert_eq!(read_model(&buf[..]).unwrap(), AnyModel::Single(single));

        buf.truncate(buf.len() - 1);
        assert!(matches!(read_model(&buf[..]), Err(Error::Format(_))));
        assert!(matches!(read_model(&b"NOTAMODEL"[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn objective_invariant_under_user_relabeling(seed in any::<u64>(), perm_seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n, k) = (6, 5, 3);
            let mut trips = Vec::new();
            for i in 0..m {
                for j in 0..n {
                    if rng.gen_bool(0.5) {
                        trips.push(Triplet::new(i, j, rng.gen_range(1.0..5.0)));
                    }
                }
            }
            let w: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let model = FactorModel::from_parts(m, n, k, w.clone(), h.clone()).unwrap();
            let a = RatingsMatrix::from_triplets(&trips, m, n).unwrap();

            let mut perm: Vec<usize> = (0..m).collect();
            let mut prng = ChaCha8Rng::seed_from_u64(perm_seed);
            for i in (1..m).rev() {
                perm.swap(i, prng.gen_range(0..=i));
            }
            let mut w2 = vec![0.0; m * k];
            for i in 0..m {
                w2[perm[i] * k..(perm[i] + 1) * k].copy_from_slice(&w[i * k..(i + 1) * k]);
            }
            let trips2: Vec<_> = trips.iter().map(|t| Triplet::new(perm[t.user], t.item, t.rating)).collect();
            let model2 = FactorModel::from_parts(m, n, k, w2, h).unwrap();
            let a2 = RatingsMatrix::from_triplets(&trips2, m, n).unwrap();

            let o1 = objective(&model, &a, 0.1).unwrap();
            let o2 = objective(&model2, &a2, 0.1).unwrap();
            prop_assert_eq!(o1.to_bits(), o2.to_bits());
            prop_assert!(o1 >= 0.1 * model.squared_norm());
        }

        #[test]
        fn rmse_nonnegative_and_top_n_sorted(seed in any::<u64>(), count in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n, k) = (3, 9, 2);
            let w: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let model = FactorModel::from_parts(m, n, k, w, h).unwrap();
            let probe = ProbeSet::new((0..5).map(|_| Triplet::new(rng.gen_range(0..m), rng.gen_range(0..n), rng.gen_range(1.0..5.0))).collect());
            prop_assert!(rmse(&model, &probe).unwrap() >= 0.0);

            let exclude: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            let top = model.top_n(1, count, &exclude).unwrap();
            prop_assert_eq!(top.len(), count.min(n - exclude.len()));
            prop_assert!(top.windows(2).all(|p| p[0].1 >= p[1].1));
            let mut items: Vec<usize> = top.iter().map(|p| p.0).collect();
            prop_assert!(items.iter().all(|j| !exclude.contains(j)));
            items.sort();
            items.dedup();
            prop_assert_eq!(items.len(), top.len());
        }
    }
}
