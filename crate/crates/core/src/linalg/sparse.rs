use serde::{Deserialize, Serialize};

use super::{DenseVector, LinalgError};

/// Row-compressed sparse matrix.
///
/// Column indices are strictly increasing within each row, no explicit zeros
/// are stored and every stored value is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in input order, zeros (including cancelled sums) are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, LinalgError> {
        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(LinalgError::IndexOutOfBounds { row: r, col: c, rows, cols });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: r, col: c });
            }
            buckets[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in buckets {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == col {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    indices.push(col);
                    values.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { rows, cols, indptr, indices, values })
    }

    /// Builds a matrix from raw CSR arrays, validating every invariant.
    /// Explicit zeros are removed.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if indptr.len() != rows + 1
            || indptr[0] != 0
            || indices.len() != values.len()
            || indptr[rows] != indices.len()
        {
            return Err(LinalgError::MalformedCsr("inconsistent array lengths"));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(LinalgError::MalformedCsr("row pointers decrease"));
        }
        for r in 0..rows {
            let cols_in_row = &indices[indptr[r]..indptr[r + 1]];
            if cols_in_row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::MalformedCsr("column indices not strictly increasing"));
            }
            if let Some(&c) = cols_in_row.last() {
                if c >= cols {
                    return Err(LinalgError::IndexOutOfBounds { row: r, col: c, rows, cols });
                }
            }
            for (k, v) in values[indptr[r]..indptr[r + 1]].iter().enumerate() {
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite { row: r, col: cols_in_row[k] });
                }
            }
        }
        if values.iter().all(|&v| v != 0.0) {
            return Ok(Self { rows, cols, indptr, indices, values });
        }
        let triplets = (0..rows).flat_map(|r| {
            let (idx, val) = (&indices, &values);
            (indptr[r]..indptr[r + 1]).map(move |k| (r, idx[k], val[k]))
        });
        Self::from_triplets(rows, cols, triplets.collect::<Vec<_>>())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::MalformedCsr("ragged dense rows"));
        }
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)));
        Self::from_triplets(rows.len(), cols, triplets.collect::<Vec<_>>())
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        if value == 0.0 {
            return Self::zeros(n, n);
        }
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![value; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    /// `⟨row_i, x⟩` without bounds checks on `x` beyond slice indexing.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| val[k])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let triplets = self.triplets().map(|(i, j, v)| (i, j, v * factor)).collect::<Vec<_>>();
        Self::from_triplets(self.rows, self.cols, triplets).expect("scaling preserves shape")
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// True when the matrix is exactly `-I`.
    pub fn is_negative_identity(&self) -> bool {
        self.rows == self.cols
            && self.nnz() == self.rows
            && (0..self.rows).all(|i| {
                let (idx, val) = self.row(i);
                idx == [i] && val == [-1.0]
            })
    }

    pub fn matvec(&self, v: &[f64]) -> Result<DenseVector, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec",
                expected: self.cols,
                found: v.len(),
            });
        }
        let mut out = DenseVector::zeros(self.rows);
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// `out = M v`. Shapes are the caller's responsibility.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, v);
        }
    }

    pub fn matvec_transpose(&self, v: &[f64]) -> Result<DenseVector, LinalgError> {
        if v.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec_transpose",
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = DenseVector::zeros(self.cols);
        self.matvec_transpose_into(v, &mut out);
        Ok(out)
    }

    /// `out = Mᵀ v`, accumulated in row order.
    pub fn matvec_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let (idx, val) = self.row(i);
            for (&j, &m) in idx.iter().zip(val) {
                out[j] += m * vi;
            }
        }
    }

    /// Dense row-major `MᵀM` (cols × cols).
    pub fn gram_dense(&self) -> Vec<f64> {
        let d = self.cols;
        let mut g = vec![0.0; d * d];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (a, (&j, &vj)) in idx.iter().zip(val).enumerate() {
                for (&k, &vk) in idx[a..].iter().zip(&val[a..]) {
                    g[j * d + k] += vj * vk;
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                g[j * d + k] = g[k * d + j];
            }
        }
        g
    }

    /// Stacks `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &SparseMatrix) -> Result<Self, LinalgError> {
        if self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "vstack",
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut indptr = self.indptr.clone();
        let offset = self.nnz();
        indptr.extend(other.indptr[1..].iter().map(|p| p + offset));
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, indptr, indices, values })
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &r in rows {
            let (idx, val) = self.row(r);
            indices.extend_from_slice(idx);
            values.extend_from_slice(val);
            indptr.push(indices.len());
        }
        Self { rows: rows.len(), cols: self.cols, indptr, indices, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m22() -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![0.0, 2.0]]).unwrap()
    }

    #[test]
    fn matvec_identity() {
        let v = SparseMatrix::identity(3).matvec(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn matvec_zero_matrix() {
        let v = SparseMatrix::zeros(2, 2).matvec(&[5.0, 7.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn matvec_hand_expansion() {
        // [[1,-1],[0,2]] (3,4) = (3-4, 8)
        assert_eq!(m22().matvec(&[3.0, 4.0]).unwrap().as_slice(), &[-1.0, 8.0]);
    }

    #[test]
    fn matvec_transpose_hand_expansion() {
        // columns: (1,0)·(3,4)=3, (-1,2)·(3,4)=5
        assert_eq!(m22().matvec_transpose(&[3.0, 4.0]).unwrap().as_slice(), &[3.0, 5.0]);
        let i3 = SparseMatrix::identity(3);
        assert_eq!(i3.matvec_transpose(&[1.0, 2.0, 3.0]).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(m22().matvec_transpose(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_names_both_sizes() {
        let err = m22().matvec(&[1.0, 2.0, 3.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
        assert!(m22().matvec_transpose(&[1.0]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            vec![(0, 2, 1.0), (0, 0, 2.0), (0, 2, -1.0), (1, 1, 0.0), (1, 0, 4.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0), (&[0usize][..], &[2.0][..]));
        assert_eq!(m.row(1), (&[0usize][..], &[4.0][..]));
    }

    #[test]
    fn csr_rejects_unsorted_columns() {
        let err = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(err.is_err());
        let ok = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![0, 1], vec![0.0, 1.0]).unwrap();
        assert_eq!(ok.nnz(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SparseMatrix::from_triplets(1, 1, vec![(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn negative_identity_detection() {
        assert!(SparseMatrix::scaled_identity(3, -1.0).is_negative_identity());
        assert!(!SparseMatrix::identity(3).is_negative_identity());
    }

    #[test]
    fn gram_matches_dense_product() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0], vec![-1.0, 0.0]]).unwrap();
        // MᵀM = [[2, 2], [2, 13]]
        assert_eq!(m.gram_dense(), vec![2.0, 2.0, 2.0, 13.0]);
    }
}
