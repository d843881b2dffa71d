//! Sparse kernel: compressed-row storage, products, direct factorizations
//! for SPD and symmetric indefinite systems, and the symmetric tridiagonal
//! eigenvalue routine used by the Lanczos condition estimate.

mod dense_bk;
mod eigen;
mod factor;
mod ordering;
mod skyline;

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use eigen::{tridiag_eigenvalues, tridiag_extreme_eigenvalues};
pub use factor::{factorize, factorize_with, FactorKind, FactorOptions, Factorization, Ordering};
pub use ordering::reverse_cuthill_mckee;

/// How a [`SparseMatrix`] stores its entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    /// Both triangles stored; `A[i][j]` and `A[j][i]` are bitwise equal.
    SymmetricFull,
    /// Only `j >= i` stored; the lower triangle is implied.
    SymmetricUpper,
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..n_rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if end < start {
                return Err(Error::InvalidMatrix("row_offsets decreasing".into()));
            }
            let row = &col_indices[start..end];
            for (k, &c) in row.iter().enumerate() {
                if c >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(Error::InvalidMatrix(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
                if symmetry == Symmetry::SymmetricUpper && c < i {
                    return Err(Error::InvalidMatrix(format!(
                        "lower-triangle entry ({i},{c}) in upper storage"
                    )));
                }
            }
        }
        let m = SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            symmetry,
        };
        if symmetry != Symmetry::General && n_rows != n_cols {
            return Err(Error::InvalidMatrix("symmetric matrix must be square".into()));
        }
        if symmetry == Symmetry::SymmetricFull && !m.is_exactly_symmetric() {
            return Err(Error::InvalidMatrix(
                "matrix flagged symmetric-full is not exactly symmetric".into(),
            ));
        }
        Ok(m)
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates in
    /// insertion order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
        symmetry: Symmetry,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r},{c}) outside {n_rows}x{n_cols}"
                )));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::new(n_rows, n_cols, row_offsets, col_indices, values, symmetry)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
            symmetry: Symmetry::SymmetricFull,
        }
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(a: &DMatrix<f64>, symmetry: Symmetry) -> Result<Self> {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if symmetry == Symmetry::SymmetricUpper && j < i {
                    continue;
                }
                let v = a[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t, symmetry)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if self.symmetry == Symmetry::SymmetricUpper && j < i {
            (j, i)
        } else {
            (i, j)
        };
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    fn is_exactly_symmetric(&self) -> bool {
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `A·x`. Summation runs over stored entries in row order, so repeated
    /// calls are bitwise identical.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.n_cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = A·x`; lengths must already agree.
    pub(crate) fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        match self.symmetry {
            Symmetry::SymmetricUpper => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..self.n_rows {
                    for (j, a) in self.row(i) {
                        y[i] += a * x[j];
                        if j != i {
                            y[j] += a * x[i];
                        }
                    }
                }
            }
            _ => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (j, a) in self.row(i) {
                        s += a * x[j];
                    }
                    *yi = s;
                }
            }
        }
    }

    /// `Aᵀ·x` for general storage; equals `A·x` for symmetric storage.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.symmetry != Symmetry::General {
            return self.matvec(x);
        }
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                context: "transpose_matvec",
                expected: self.n_rows,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, a) in self.row(i) {
                y[j] += a * xi;
            }
        }
        Ok(y)
    }

    /// Expands any storage to an explicit general or symmetric-full CSR.
    pub fn to_full_storage(&self) -> SparseMatrix {
        if self.symmetry != Symmetry::SymmetricUpper {
            return self.clone();
        }
        let mut t = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
                if i != j {
                    t.push((j, i, v));
                }
            }
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &t, Symmetry::SymmetricFull)
            .expect("upper storage expands to a valid full matrix")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let full = self.to_full_storage();
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in full.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Extracts `A[rows, cols]` in the given index order. The result is
    /// flagged symmetric-full when `rows == cols` and `A` is symmetric.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let full = self.to_full_storage();
        let mut col_pos = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in full.row(r) {
                let k = col_pos[c];
                if k != usize::MAX {
                    t.push((ri, k, v));
                }
            }
        }
        let symmetry = if rows == cols && self.symmetry != Symmetry::General {
            Symmetry::SymmetricFull
        } else {
            Symmetry::General
        };
        SparseMatrix::from_triplets(rows.len(), cols.len(), &t, symmetry)
            .expect("submatrix of a valid matrix is valid")
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes MatrixMarket coordinate format with 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let full = self.to_full_storage();
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, full.nnz())?;
        for i in 0..self.n_rows {
            for (j, v) in full.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t, Symmetry::SymmetricFull).unwrap()
    }

    #[test]
    fn matvec_identity() {
        let a = SparseMatrix::identity(2);
        assert_eq!(a.matvec(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn matvec_row_sums() {
        let a = SparseMatrix::from_dense(
            &DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
            Symmetry::SymmetricFull,
        )
        .unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn matvec_poisson_matches_dense_product() {
        let a = poisson_1d(3);
        let x = [1.0, 2.0, 3.0];
        let dense = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        let y = a.matvec(&x).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
        assert_eq!(y, dense.as_slice());
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let a = poisson_1d(3);
        assert!(matches!(
            a.matvec(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1, .. })
        ));
    }

    #[test]
    fn upper_storage_matches_full() {
        let a = poisson_1d(5);
        let upper = SparseMatrix::from_dense(&a.to_dense(), Symmetry::SymmetricUpper).unwrap();
        let x = [0.5, -1.0, 2.0, 0.25, 3.0];
        assert_eq!(upper.matvec(&x).unwrap(), a.matvec(&x).unwrap());
        assert_eq!(upper.to_full_storage(), a);
    }

    #[test]
    fn rejects_asymmetric_full_flag() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(SparseMatrix::from_dense(&d, Symmetry::SymmetricFull).is_err());
    }

    #[test]
    fn rejects_unsorted_columns() {
        let r = SparseMatrix::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0], Symmetry::General);
        assert!(r.is_err());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5)],
            Symmetry::SymmetricFull,
        )
        .unwrap();
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn submatrix_extracts_blocks() {
        let a = poisson_1d(4);
        let s = a.submatrix(&[1, 2], &[1, 2]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        let off = a.submatrix(&[0], &[1, 3]);
        assert_eq!(off.to_dense(), DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]));
    }

    #[test]
    fn matrix_market_is_one_based() {
        let a = poisson_1d(2);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 2 4");
        assert!(lines[2].starts_with("1 1 "));
        assert!(lines[5].starts_with("2 2 "));
    }
}
