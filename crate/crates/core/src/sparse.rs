//! Sparse rating storage in two layouts.
//!
//! A [`RatingsMatrix`] stores every observed rating twice: once grouped by
//! user (row layout) and once grouped by item (column layout). The shared
//! [`SparsePattern`] carries the offsets, the indices and the cross-links
//! between the two copies, so a write to one layout can be mirrored into the
//! other in O(1). [`ResidualMatrix`] reuses the same pattern with its own
//! mutable values.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{check_index, Error, Result};
use crate::scalar::Scalar;

/// One observed rating with dense 0-based indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet<T> {
    pub user: usize,
    pub item: usize,
    pub rating: T,
}

impl<T> Triplet<T> {
    pub fn new(user: usize, item: usize, rating: T) -> Self {
        Triplet { user, item, rating }
    }
}

/// Index structure shared by a ratings matrix and its residuals.
#[derive(Debug, PartialEq, Eq)]
pub struct SparsePattern {
    m: usize,
    n: usize,
    row_start: Vec<usize>,
    col_of: Vec<u32>,
    col_start: Vec<usize>,
    row_of: Vec<u32>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
}

impl SparsePattern {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_of.len()
    }

    /// Offsets into the row layout, length `m + 1`.
    pub fn row_start(&self) -> &[usize] {
        &self.row_start
    }

    /// Offsets into the column layout, length `n + 1`.
    pub fn col_start(&self) -> &[usize] {
        &self.col_start
    }

    /// Item index of every row-layout entry.
    pub fn col_of(&self) -> &[u32] {
        &self.col_of
    }

    /// User index of every column-layout entry.
    pub fn row_of(&self) -> &[u32] {
        &self.row_of
    }

    /// Row-layout position to column-layout position.
    pub fn row_to_col(&self) -> &[usize] {
        &self.row_to_col
    }

    /// Column-layout position to row-layout position.
    pub fn col_to_row(&self) -> &[usize] {
        &self.col_to_row
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_start[i]..self.row_start[i + 1]
    }

    #[inline]
    pub fn col_range(&self, j: usize) -> Range<usize> {
        self.col_start[j]..self.col_start[j + 1]
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }

    pub fn col_len(&self, j: usize) -> usize {
        self.col_start[j + 1] - self.col_start[j]
    }

    /// Items rated by user `i` with their row-layout positions, ascending.
    pub fn row_slice(&self, i: usize) -> Result<impl ExactSizeIterator<Item = (usize, usize)> + '_> {
        check_index("row", i, self.m)?;
        let range = self.row_range(i);
        Ok(range.map(move |e| (self.col_of[e] as usize, e)))
    }

    /// Users who rated item `j` with their column-layout positions, ascending.
    pub fn col_slice(&self, j: usize) -> Result<impl ExactSizeIterator<Item = (usize, usize)> + '_> {
        check_index("column", j, self.n)?;
        let range = self.col_range(j);
        Ok(range.map(move |e| (self.row_of[e] as usize, e)))
    }

    /// Checks every structural invariant; used by tests and debug paths.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Dimension(msg));
        if self.row_start.len() != self.m + 1 || self.col_start.len() != self.n + 1 {
            return bad("offset array length".into());
        }
        let nnz = self.nnz();
        if self.row_start[self.m] != nnz || self.col_start[self.n] != nnz || self.row_of.len() != nnz {
            return bad("offset totals disagree with nnz".into());
        }
        if self.row_start[0] != 0 || self.col_start[0] != 0 {
            return bad("offsets must start at zero".into());
        }
        for i in 0..self.m {
            if self.row_start[i] > self.row_start[i + 1] {
                return bad(format!("row offsets decrease at {i}"));
            }
            let cols = &self.col_of[self.row_range(i)];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} items not strictly increasing"));
            }
        }
        for j in 0..self.n {
            if self.col_start[j] > self.col_start[j + 1] {
                return bad(format!("column offsets decrease at {j}"));
            }
            let rows = &self.row_of[self.col_range(j)];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("column {j} users not strictly increasing"));
            }
            for e in self.col_range(j) {
                let r = self.col_to_row[e];
                if self.row_to_col[r] != e || self.col_of[r] as usize != j {
                    return bad(format!("cross-link broken at column entry {e}"));
                }
                let i = self.row_of[e] as usize;
                if !self.row_range(i).contains(&r) {
                    return bad(format!("cross-link points outside row {i}"));
                }
            }
        }
        Ok(())
    }
}

fn try_vec<V: Clone>(what: &'static str, len: usize, fill: V) -> Result<Vec<V>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| Error::Allocation {
        what,
        bytes: len.saturating_mul(std::mem::size_of::<V>()),
    })?;
    v.resize(len, fill);
    Ok(v)
}

/// Sparse `m x n` rating matrix with row and column layouts kept in sync.
#[derive(Clone, Debug)]
pub struct RatingsMatrix<T> {
    pattern: Arc<SparsePattern>,
    val_row: Vec<T>,
    val_col: Vec<T>,
}

impl<T: Scalar> RatingsMatrix<T> {
    /// Builds both layouts. Triplet order does not matter; duplicates and
    /// out-of-range indices are rejected.
    pub fn from_triplets(triplets: &[Triplet<T>], m: usize, n: usize) -> Result<Self> {
        if m > u32::MAX as usize || n > u32::MAX as usize {
            return Err(Error::Dimension(format!(
                "{m} x {n} exceeds the 32-bit index range"
            )));
        }
        let nnz = triplets.len();
        let mut row_start = try_vec("row offsets", m + 1, 0usize)?;
        let mut col_start = try_vec("column offsets", n + 1, 0usize)?;
        for t in triplets {
            if t.user >= m || t.item >= n {
                return Err(Error::Dimension(format!(
                    "rating ({}, {}) outside {m} x {n}",
                    t.user, t.item
                )));
            }
            if !t.rating.is_finite() {
                return Err(Error::Parameter(format!(
                    "non-finite rating at ({}, {})",
                    t.user, t.item
                )));
            }
            row_start[t.user + 1] += 1;
            col_start[t.item + 1] += 1;
        }
        for i in 0..m {
            row_start[i + 1] += row_start[i];
        }
        for j in 0..n {
            col_start[j + 1] += col_start[j];
        }

        // Bucket by row, then sort each row by item.
        let mut order = try_vec("row staging", nnz, 0usize)?;
        let mut cursor = row_start.clone();
        for (idx, t) in triplets.iter().enumerate() {
            order[cursor[t.user]] = idx;
            cursor[t.user] += 1;
        }
        for i in 0..m {
            order[row_start[i]..row_start[i + 1]].sort_unstable_by_key(|&idx| triplets[idx].item);
        }

        let mut col_of = try_vec("row-layout indices", nnz, 0u32)?;
        let mut val_row = try_vec("row-layout values", nnz, T::zero())?;
        for i in 0..m {
            let mut prev: Option<usize> = None;
            for e in row_start[i]..row_start[i + 1] {
                let t = &triplets[order[e]];
                if prev == Some(t.item) {
                    return Err(Error::Duplicate { user: i, item: t.item });
                }
                prev = Some(t.item);
                col_of[e] = t.item as u32;
                val_row[e] = t.rating;
            }
        }
        drop(order);

        // Rows visited in ascending order keep each column's users sorted.
        let mut row_of = try_vec("column-layout indices", nnz, 0u32)?;
        let mut val_col = try_vec("column-layout values", nnz, T::zero())?;
        let mut row_to_col = try_vec("row cross-links", nnz, 0usize)?;
        let mut col_to_row = try_vec("column cross-links", nnz, 0usize)?;
        let mut cursor = col_start.clone();
        for i in 0..m {
            for e in row_start[i]..row_start[i + 1] {
                let j = col_of[e] as usize;
                let c = cursor[j];
                cursor[j] += 1;
                row_of[c] = i as u32;
                val_col[c] = val_row[e];
                row_to_col[e] = c;
                col_to_row[c] = e;
            }
        }

        Ok(RatingsMatrix {
            pattern: Arc::new(SparsePattern {
                m,
                n,
                row_start,
                col_of,
                col_start,
                row_of,
                row_to_col,
                col_to_row,
            }),
            val_row,
            val_col,
        })
    }

    pub fn pattern(&self) -> &SparsePattern {
        &self.pattern
    }

    pub fn rows(&self) -> usize {
        self.pattern.m
    }

    pub fn cols(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn row_values(&self) -> &[T] {
        &self.val_row
    }

    pub fn col_values(&self) -> &[T] {
        &self.val_col
    }

    pub fn row_slice(&self, i: usize) -> Result<impl ExactSizeIterator<Item = (usize, usize)> + '_> {
        self.pattern.row_slice(i)
    }

    pub fn col_slice(&self, j: usize) -> Result<impl ExactSizeIterator<Item = (usize, usize)> + '_> {
        self.pattern.col_slice(j)
    }

    /// All entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet<T>> + '_ {
        let p = &*self.pattern;
        (0..p.m).flat_map(move |i| {
            p.row_range(i)
                .map(move |e| Triplet::new(i, p.col_of[e] as usize, self.val_row[e]))
        })
    }

    /// Rating at `(i, j)` if observed.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        if i >= self.rows() || j >= self.cols() {
            return None;
        }
        let range = self.pattern.row_range(i);
        let cols = &self.pattern.col_of[range.clone()];
        cols.binary_search(&(j as u32))
            .ok()
            .map(|k| self.val_row[range.start + k])
    }

    /// True when every row-layout value equals its column-layout mirror bit for bit.
    pub fn layouts_agree(&self) -> bool {
        layouts_agree(&self.pattern, &self.val_row, &self.val_col)
    }

    /// Residual of the zero model, `R = A`.
    pub fn residual(&self) -> ResidualMatrix<T> {
        ResidualMatrix {
            pattern: Arc::clone(&self.pattern),
            val_row: self.val_row.clone(),
            val_col: self.val_col.clone(),
        }
    }
}

/// Residual values over the same sparsity pattern as a [`RatingsMatrix`].
///
/// Both layouts are mutable. Writers either mirror every change through the
/// cross-links or apply the same arithmetic to each layout separately; at
/// every phase boundary the two copies hold identical bits.
#[derive(Clone, Debug)]
pub struct ResidualMatrix<T> {
    pattern: Arc<SparsePattern>,
    val_row: Vec<T>,
    val_col: Vec<T>,
}

/// `R <- A`, the residual for an all-zero `W`.
pub fn residual_from<T: Scalar>(a: &RatingsMatrix<T>) -> ResidualMatrix<T> {
    a.residual()
}

impl<T: Scalar> ResidualMatrix<T> {
    pub fn pattern(&self) -> &SparsePattern {
        &self.pattern
    }

    pub fn shares_pattern_with(&self, a: &RatingsMatrix<T>) -> bool {
        Arc::ptr_eq(&self.pattern, &a.pattern)
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn row_values(&self) -> &[T] {
        &self.val_row
    }

    pub fn col_values(&self) -> &[T] {
        &self.val_col
    }

    /// Both layouts, mutably, alongside the shared pattern.
    pub fn split_mut(&mut self) -> (&SparsePattern, &mut [T], &mut [T]) {
        (&self.pattern, &mut self.val_row, &mut self.val_col)
    }

    /// Subtracts `delta` at row-layout position `e` and at its column mirror.
    #[inline]
    pub fn sub_at_row_entry(&mut self, e: usize, delta: T) {
        let c = self.pattern.row_to_col[e];
        self.val_row[e] -= delta;
        self.val_col[c] -= delta;
    }

    /// Subtracts `delta` at column-layout position `e` and at its row mirror.
    #[inline]
    pub fn sub_at_col_entry(&mut self, e: usize, delta: T) {
        let r = self.pattern.col_to_row[e];
        self.val_col[e] -= delta;
        self.val_row[r] -= delta;
    }

    pub fn layouts_agree(&self) -> bool {
        layouts_agree(&self.pattern, &self.val_row, &self.val_col)
    }

    /// Residual as `(user, item, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet<T>> + '_ {
        let p = &*self.pattern;
        (0..p.m).flat_map(move |i| {
            p.row_range(i)
                .map(move |e| Triplet::new(i, p.col_of[e] as usize, self.val_row[e]))
        })
    }
}

fn layouts_agree<T: Scalar>(p: &SparsePattern, val_row: &[T], val_col: &[T]) -> bool {
    val_row
        .iter()
        .zip(&p.row_to_col)
        .all(|(v, &c)| v.bits() == val_col[c].bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::ExactSum;
    use proptest::prelude::*;

    fn t(u: usize, i: usize, r: f64) -> Triplet<f64> {
        Triplet::new(u, i, r)
    }

    #[test]
    fn empty_matrix() {
        let a = RatingsMatrix::<f64>::from_triplets(&[], 2, 2).unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.pattern().row_start(), &[0, 0, 0]);
        assert_eq!(a.pattern().col_start(), &[0, 0, 0]);
        a.pattern().validate().unwrap();
    }

    #[test]
    fn two_entry_layouts() {
        let a = RatingsMatrix::from_triplets(&[t(0, 1, 3.0), t(1, 0, 2.0)], 2, 2).unwrap();
        let p = a.pattern();
        // hand-built row layout
        assert_eq!(p.row_start(), &[0, 1, 2]);
        assert_eq!(p.col_of(), &[1, 0]);
        assert_eq!(a.row_values(), &[3.0, 2.0]);
        // column 0 holds (1,0), column 1 holds (0,1)
        assert_eq!(p.col_start(), &[0, 1, 2]);
        assert_eq!(p.row_of(), &[1, 0]);
        assert_eq!(a.col_values(), &[2.0, 3.0]);
        assert_eq!(p.row_to_col(), &[1, 0]);
        assert!(a.layouts_agree());
    }

    #[test]
    fn rejects_out_of_bounds_and_duplicates() {
        assert!(matches!(
            RatingsMatrix::from_triplets(&[t(2, 0, 1.0)], 2, 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            RatingsMatrix::from_triplets(&[t(0, 5, 1.0)], 2, 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            RatingsMatrix::from_triplets(&[t(1, 1, 1.0), t(0, 0, 2.0), t(1, 1, 4.0)], 2, 2),
            Err(Error::Duplicate { user: 1, item: 1 })
        ));
        assert!(matches!(
            RatingsMatrix::from_triplets(&[t(0, 0, f64::NAN)], 1, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn row_slice_order_and_errors() {
        let a = RatingsMatrix::from_triplets(&[t(0, 4, 1.0), t(0, 1, 3.0)], 2, 5).unwrap();
        let items: Vec<usize> = a.row_slice(0).unwrap().map(|(j, _)| j).collect();
        assert_eq!(items, vec![1, 4]);
        assert_eq!(a.row_slice(1).unwrap().len(), 0);
        assert!(a.row_slice(2).is_err());
        assert!(a.col_slice(5).is_err());
        assert_eq!(a.get(0, 4), Some(1.0));
        assert_eq!(a.get(1, 4), None);
    }

    #[test]
    fn residual_starts_equal_to_ratings() {
        let a = RatingsMatrix::<f64>::from_triplets(&[], 3, 3).unwrap();
        assert_eq!(a.residual().nnz(), 0);

        let a = RatingsMatrix::from_triplets(&[t(0, 0, 5.0)], 1, 1).unwrap();
        let r = residual_from(&a);
        assert_eq!(r.row_values(), &[5.0]);
        assert_eq!(r.col_values(), &[5.0]);
        assert!(r.shares_pattern_with(&a));
    }

    #[test]
    fn mirrored_writes_keep_layouts_in_sync() {
        let a = RatingsMatrix::from_triplets(
            &[t(0, 1, 1.0), t(1, 0, 2.0), t(1, 1, 3.0), t(2, 1, 4.0)],
            3,
            2,
        )
        .unwrap();
        let mut r = a.residual();
        r.sub_at_row_entry(2, 0.5);
        r.sub_at_col_entry(0, 0.25);
        assert!(r.layouts_agree());
        let vals: Vec<f64> = r.triplets().map(|t| t.rating).collect();
        assert_eq!(vals, vec![1.0, 1.75, 2.5, 4.0]);
    }

    #[test]
    fn large_dimensions_fit_index_types() {
        // Netflix-sized dimensions with a handful of entries; offsets are
        // usize so 100,480,507 entries cannot overflow them.
        let (m, n) = (480_189, 17_770);
        let entries = [t(0, 0, 1.0), t(m - 1, n - 1, 5.0), t(240_000, 9_000, 3.0)];
        let a = RatingsMatrix::from_triplets(&entries, m, n).unwrap();
        assert_eq!(a.pattern().row_start()[m], 3);
        assert_eq!(a.get(m - 1, n - 1), Some(5.0));
        let netflix_nnz: usize = 100_480_507;
        assert!(netflix_nnz < usize::MAX / 8);
        assert!(m <= u32::MAX as usize && n <= u32::MAX as usize);
    }

    fn arb_triplets() -> impl Strategy<Value = (usize, usize, Vec<Triplet<f64>>)> {
        (1usize..12, 1usize..12).prop_flat_map(|(m, n)| {
            let cells = prop::collection::btree_map((0..m, 0..n), -5.0f64..5.0, 0..(m * n).min(40));
            (Just(m), Just(n), cells.prop_map(|map| {
                map.into_iter().map(|((u, i), r)| Triplet::new(u, i, r)).collect::<Vec<_>>()
            }))
        })
    }

    proptest! {
        #[test]
        fn construction_invariants((m, n, mut trips) in arb_triplets(), seed in any::<u64>()) {
            // shuffle input order; the result must not depend on it
            let mut s = seed | 1;
            for i in (1..trips.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                trips.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let a = RatingsMatrix::from_triplets(&trips, m, n).unwrap();
            a.pattern().validate().unwrap();
            prop_assert!(a.layouts_agree());
            prop_assert_eq!(a.nnz(), trips.len());

            let sum_row: ExactSum = a.row_values().iter().copied().collect();
            let sum_col: ExactSum = a.col_values().iter().copied().collect();
            prop_assert_eq!(sum_row.value().to_bits(), sum_col.value().to_bits());

            let rows: usize = (0..m).map(|i| a.pattern().row_len(i)).sum();
            let cols: usize = (0..n).map(|j| a.pattern().col_len(j)).sum();
            prop_assert_eq!(rows, a.nnz());
            prop_assert_eq!(cols, a.nnz());

            let mut back: Vec<(usize, usize, u64)> =
                a.triplets().map(|t| (t.user, t.item, t.rating.to_bits())).collect();
            let mut orig: Vec<(usize, usize, u64)> =
                trips.iter().map(|t| (t.user, t.item, t.rating.to_bits())).collect();
            back.sort();
            orig.sort();
            prop_assert_eq!(back, orig);

            for j in 0..n {
                let got: Vec<(usize, u64)> = a.col_slice(j).unwrap()
                    .map(|(u, e)| (u, a.col_values()[e].to_bits())).collect();
                let mut want: Vec<(usize, u64)> = trips.iter().filter(|t| t.item == j)
                    .map(|t| (t.user, t.rating.to_bits())).collect();
                want.sort();
                prop_assert_eq!(got, want);
            }
        }
    }
}
