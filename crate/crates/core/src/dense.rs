//! Small dense `k x k` kernels for the regularized normal equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square matrix of order `k`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallMatrix<T> {
    order: usize,
    data: Vec<T>,
}

impl<T: Scalar> SmallMatrix<T> {
    pub fn zeros(order: usize) -> Self {
        SmallMatrix {
            order,
            data: vec![T::zero(); order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {order}",
                    row.len()
                )));
            }
            m.data[i * order..(i + 1) * order].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    /// `self * x`, row-major accumulation.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.order)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.order);
        for i in 0..self.order {
            for j in 0..self.order {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let k = self.order;
        let mut out = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                let mut s = T::zero();
                for p in 0..k {
                    s += self[(i, p)] * other[(p, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for SmallMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.order + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SmallMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.order + j]
    }
}

/// `sum_r h_r h_r^T + lambda I` over the given rows.
///
/// Each entry is accumulated over rows in iteration order, upper triangle
/// first, then mirrored, so the result is exactly symmetric.
pub fn gram_plus_ridge<'a, T, I>(rows: I, lambda: T, k: usize) -> Result<SmallMatrix<T>>
where
    T: Scalar,
    I: IntoIterator<Item = &'a [T]>,
{
    if !(lambda >= T::zero()) {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if k == 0 {
        return Err(Error::Dimension("order must be at least 1".into()));
    }
    let mut g = SmallMatrix::zeros(k);
    for h in rows {
        if h.len() != k {
            return Err(Error::Dimension(format!(
                "row of length {} in a rank-{k} Gram matrix",
                h.len()
            )));
        }
        accumulate_outer(&mut g, h);
    }
    finish_gram(&mut g, lambda);
    Ok(g)
}

/// Adds `h h^T` into the upper triangle of `g`.
#[inline]
pub(crate) fn accumulate_outer<T: Scalar>(g: &mut SmallMatrix<T>, h: &[T]) {
    let k = g.order;
    for a in 0..k {
        let ha = h[a];
        let row = &mut g.data[a * k..(a + 1) * k];
        for b in a..k {
            row[b] += ha * h[b];
        }
    }
}

/// Mirrors the upper triangle down and adds the ridge to the diagonal.
pub(crate) fn finish_gram<T: Scalar>(g: &mut SmallMatrix<T>, lambda: T) {
    let k = g.order;
    for a in 0..k {
        for b in (a + 1)..k {
            g.data[b * k + a] = g.data[a * k + b];
        }
        g.data[a * k + a] += lambda;
    }
}

/// Lower-triangular `L` with `L L^T = m`. No pivoting.
pub fn cholesky_factor<T: Scalar>(m: &SmallMatrix<T>) -> Result<SmallMatrix<T>> {
    let k = m.order;
    let mut l = SmallMatrix::zeros(k);
    for j in 0..k {
        let mut d = m[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: d.as_f64(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..k {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` by forward then back substitution.
pub fn cholesky_solve<T: Scalar>(l: &SmallMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let mut x = vec![T::zero(); l.order];
    cholesky_solve_into(l, b, &mut x)?;
    Ok(x)
}

pub fn cholesky_solve_into<T: Scalar>(l: &SmallMatrix<T>, b: &[T], x: &mut [T]) -> Result<()> {
    let k = l.order;
    if b.len() != k || x.len() != k {
        return Err(Error::Dimension(format!(
            "right-hand side of length {} for order {k}",
            b.len()
        )));
    }
    for i in 0..k {
        let d = l[(i, i)];
        if d == T::zero() {
            return Err(Error::Singular(i));
        }
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * x[p];
        }
        x[i] = s / d;
    }
    for i in (0..k).rev() {
        let mut s = x[i];
        for p in (i + 1)..k {
            s -= l[(p, i)] * x[p];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ridge_only_when_no_rows() {
        let g = gram_plus_ridge::<f64, _>(std::iter::empty(), 0.1, 2).unwrap();
        assert_eq!(g.as_slice(), &[0.1, 0.0, 0.0, 0.1]);
    }

    #[test]
    fn single_outer_product() {
        let row = [1.0, 0.0];
        let g = gram_plus_ridge([&row[..]], 0.0, 2).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(matches!(
            gram_plus_ridge::<f64, _>(std::iter::empty(), -1.0, 2),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn gram_matches_naive_loop_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let lambda = 0.3;
        let g = gram_plus_ridge(rows.iter().map(|r| r.as_slice()), lambda, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for r in &rows {
                    s += r[a] * r[b];
                }
                if a == b {
                    s += lambda;
                }
                assert_eq!(g[(a, b)].to_bits(), s.to_bits(), "entry ({a},{b})");
                assert_eq!(g[(a, b)].to_bits(), g[(b, a)].to_bits());
            }
        }
    }

    #[test]
    fn cholesky_identity_and_two_by_two() {
        let i3 = SmallMatrix::<f64>::identity(3);
        assert_eq!(cholesky_factor(&i3).unwrap(), i3);

        let m = SmallMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]).unwrap();
        let l = cholesky_factor(&m).unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert!(l.matmul(&l.transpose()).max_abs_diff(&m) < 1e-15);

        // 4x + 2y = 4, 2x + 3y = 5  =>  x = 1/4, y = 3/2
        let x = cholesky_solve(&l, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 0.25).abs() < 1e-15);
        assert!((x[1] - 1.5).abs() < 1e-15);
        let r = m.mul_vec(&x);
        assert!((r[0] - 4.0).abs() < 1e-14 && (r[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn identity_solve_is_passthrough() {
        let l = SmallMatrix::<f64>::identity(4);
        let b = [1.5, -2.0, 0.25, 8.0];
        assert_eq!(cholesky_solve(&l, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn rank_deficient_gram_is_not_positive_definite() {
        let row = [1.0, 1.0];
        let g = gram_plus_ridge([&row[..]], 0.0, 2).unwrap();
        assert!(matches!(
            cholesky_factor(&g),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let l = SmallMatrix::from_rows(&[&[1.0, 0.0], &[3.0, 0.0]]).unwrap();
        assert!(matches!(cholesky_solve(&l, &[1.0, 1.0]), Err(Error::Singular(1))));
    }

    #[test]
    fn single_precision_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &k in &[1usize, 2, 5, 10] {
            let rows: Vec<Vec<f32>> = (0..k + 3)
                .map(|_| (0..k).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
                .collect();
            let m = gram_plus_ridge(rows.iter().map(|r| r.as_slice()), 0.5f32, k).unwrap();
            let l = cholesky_factor(&m).unwrap();
            assert!(l.matmul(&l.transpose()).max_abs_diff(&m) <= 1e-5);
        }
    }
}
