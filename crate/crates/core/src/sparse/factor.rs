use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::dense_bk::DenseBunchKaufman;
use super::ordering::{adjacency, rcm_from_adjacency};
use super::skyline::SkylineLdl;
use super::{norm2, SparseMatrix, Symmetry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Spd,
    SymmetricIndefinite,
}

/// Fill-reducing ordering for the sparse LDLᵀ path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    #[default]
    ReverseCuthillMcKee,
    Natural,
}

#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    pub ordering: Ordering,
    /// Symmetric indefinite matrices up to this size use the dense pivoted
    /// factorization; larger ones use the sparse envelope factorization with
    /// zero-diagonal rows eliminated last.
    pub dense_threshold: usize,
    /// Relative residual above which one refinement step is taken.
    pub refinement_threshold: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            ordering: Ordering::ReverseCuthillMcKee,
            dense_threshold: 2000,
            refinement_threshold: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
enum Payload {
    Sparse(SkylineLdl),
    Dense(DenseBunchKaufman),
}

/// A reusable direct factorization of a symmetric matrix.
///
/// The matrix is symmetrically equilibrated before factoring; the original
/// matrix is kept for the residual check that triggers iterative refinement.
#[derive(Debug, Clone)]
pub struct Factorization {
    kind: FactorKind,
    n: usize,
    /// `ordering[new] = old` for the sparse path; identity for the dense path
    /// (which carries its own pivot permutation).
    ordering: Vec<usize>,
    scaling: Vec<f64>,
    payload: Payload,
    matrix: SparseMatrix,
    refinement_threshold: f64,
}

pub fn factorize(a: &SparseMatrix, kind: FactorKind) -> Result<Factorization> {
    factorize_with(a, kind, &FactorOptions::default())
}

pub fn factorize_with(a: &SparseMatrix, kind: FactorKind, opts: &FactorOptions) -> Result<Factorization> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::InvalidMatrix(format!(
            "factorization needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let full = a.to_full_storage();
    if full.symmetry() == Symmetry::General {
        let symmetric = (0..full.n_rows()).all(|i| full.row(i).all(|(j, v)| full.get(j, i) == v));
        if !symmetric {
            return Err(Error::InvalidMatrix("factorization needs a symmetric matrix".into()));
        }
    }
    let n = full.n_rows();
    if kind == FactorKind::Spd {
        for (i, d) in full.diagonal().into_iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
        }
    }

    let scaling = equilibrate(&full);
    let scaled = scale_matrix(&full, &scaling);

    let (ordering, payload) = match kind {
        FactorKind::SymmetricIndefinite if n <= opts.dense_threshold => {
            let dense = scaled.to_dense();
            let mut row_major = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    row_major.push(dense[(i, j)]);
                }
            }
            let bk = DenseBunchKaufman::factor(row_major, n)?;
            ((0..n).collect(), Payload::Dense(bk))
        }
        _ => {
            let mut perm = match opts.ordering {
                Ordering::ReverseCuthillMcKee => rcm_from_adjacency(&adjacency(&scaled)),
                Ordering::Natural => (0..n).collect(),
            };
            if kind == FactorKind::SymmetricIndefinite {
                // Zero-diagonal rows (multipliers) go last so that they are
                // eliminated against an already factored leading block.
                let diag = scaled.diagonal();
                let (nonzero, zero): (Vec<usize>, Vec<usize>) =
                    perm.iter().partition(|&&i| diag[i] != 0.0);
                perm = nonzero.into_iter().chain(zero).collect();
            }
            let ldl = SkylineLdl::factor(&scaled, &perm, kind == FactorKind::Spd)?;
            (perm, Payload::Sparse(ldl))
        }
    };
    Ok(Factorization {
        kind,
        n,
        ordering,
        scaling,
        payload,
        matrix: full,
        refinement_threshold: opts.refinement_threshold,
    })
}

/// Ruiz-style symmetric scaling towards unit max-norm rows.
fn equilibrate(a: &SparseMatrix) -> Vec<f64> {
    let n = a.n_rows();
    let mut s = vec![1.0; n];
    for _ in 0..8 {
        let mut row_max = vec![0.0f64; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                row_max[i] = row_max[i].max((s[i] * v * s[j]).abs());
            }
        }
        let mut done = true;
        for i in 0..n {
            if row_max[i] > 0.0 {
                if (row_max[i] - 1.0).abs() > 1e-3 {
                    done = false;
                }
                s[i] /= row_max[i].sqrt();
            }
        }
        if done {
            break;
        }
    }
    s
}

fn scale_matrix(a: &SparseMatrix, s: &[f64]) -> SparseMatrix {
    let values: Vec<f64> = (0..a.n_rows())
        .flat_map(|i| a.row(i).map(move |(j, v)| s[i] * v * s[j]).collect::<Vec<_>>())
        .collect();
    SparseMatrix::new(
        a.n_rows(),
        a.n_cols(),
        a.row_offsets().to_vec(),
        a.col_indices().to_vec(),
        values,
        Symmetry::General,
    )
    .expect("scaling preserves structure")
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Permutation used by the sparse path, `ordering[new] = old`.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.payload, Payload::Dense(_))
    }

    /// Number of stored off-diagonal factor entries (envelope or dense).
    pub fn factor_size(&self) -> usize {
        match &self.payload {
            Payload::Sparse(s) => s.envelope_size(),
            Payload::Dense(_) => self.n * (self.n - 1) / 2,
        }
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.payload {
            Payload::Sparse(ldl) => {
                let mut y: Vec<f64> = self
                    .ordering
                    .iter()
                    .map(|&old| self.scaling[old] * b[old])
                    .collect();
                ldl.solve_in_place(&mut y);
                let mut x = vec![0.0; self.n];
                for (new, &old) in self.ordering.iter().enumerate() {
                    x[old] = self.scaling[old] * y[new];
                }
                x
            }
            Payload::Dense(bk) => {
                let mut y: Vec<f64> = b.iter().zip(&self.scaling).map(|(v, s)| v * s).collect();
                bk.solve_in_place(&mut y);
                y.iter_mut().zip(&self.scaling).for_each(|(v, s)| *v *= s);
                y
            }
        }
    }

    /// Solves `A x = b`, with one refinement step when the residual is above
    /// the configured threshold.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "factorization solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = self.raw_solve(b);
        let bnorm = norm2(b);
        if bnorm > 0.0 {
            let mut r = vec![0.0; self.n];
            self.matrix.matvec_into(&x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            if norm2(&r) > self.refinement_threshold * bnorm {
                let dx = self.raw_solve(&r);
                x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            }
        }
        Ok(x)
    }

    /// Column-by-column solve of a multi-right-hand-side block.
    pub fn solve_block(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "factorization block solve",
                expected: self.n,
                found: b.nrows(),
            });
        }
        let mut x = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col: Vec<f64> = b.column(j).iter().copied().collect();
            let sol = self.solve(&col)?;
            x.column_mut(j).copy_from_slice(&sol);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense(n: usize, v: &[f64]) -> SparseMatrix {
        SparseMatrix::from_dense(&DMatrix::from_row_slice(n, n, v), Symmetry::SymmetricFull).unwrap()
    }

    #[test]
    fn diagonal_spd() {
        let f = factorize(&dense(2, &[4.0, 0.0, 0.0, 9.0]), FactorKind::Spd).unwrap();
        let x = f.solve(&[4.0, 9.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn permutation_matrix_indefinite() {
        let f = factorize(&dense(2, &[0.0, 1.0, 1.0, 0.0]), FactorKind::SymmetricIndefinite).unwrap();
        let x = f.solve(&[2.0, 3.0]).unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn saddle_block_matches_inverse() {
        // inv([[2,1],[1,0]]) = [[0,1],[1,-2]]
        let f = factorize(&dense(2, &[2.0, 1.0, 1.0, 0.0]), FactorKind::SymmetricIndefinite).unwrap();
        let x = f.solve(&[0.0, 1.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_solve_is_unchanged() {
        let f = factorize(&SparseMatrix::identity(3), FactorKind::Spd).unwrap();
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(f.solve_block(&b).unwrap(), b);
    }

    #[test]
    fn diagonal_block_solve() {
        let f = factorize(&dense(2, &[2.0, 0.0, 0.0, 4.0]), FactorKind::Spd).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 4.0, 8.0]);
        let x = f.solve_block(&b).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]));
    }

    #[test]
    fn tridiagonal_solve_matches_dense_inverse() {
        let a = dense(3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let inv = a.to_dense().try_inverse().unwrap();
        let f = factorize(&a, FactorKind::Spd).unwrap();
        let x = f.solve(&[1.0, 0.0, 0.0]).unwrap();
        for (i, expected) in [0.75, 0.5, 0.25].into_iter().enumerate() {
            assert_relative_eq!(x[i], expected, epsilon = 1e-14);
            assert_relative_eq!(x[i], inv[(i, 0)], epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_under_spd() {
        let a = dense(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factorize(&a, FactorKind::Spd), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn rejects_semidefinite_under_spd() {
        let a = dense(2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(factorize(&a, FactorKind::Spd), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn singular_indefinite_is_reported() {
        let a = dense(3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            factorize(&a, FactorKind::SymmetricIndefinite),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn floating_block_without_constraints_is_singular() {
        // [[K, c],[c^T, 0]] with K singular and c orthogonal to ker K.
        let a = dense(3, &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 0.0]);
        assert!(factorize(&a, FactorKind::SymmetricIndefinite).is_err());
    }

    #[test]
    fn sparse_indefinite_path_above_threshold() {
        // K SPD, one multiplier row; force the envelope path.
        let a = dense(3, &[4.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0, 1.0, 0.0]);
        let opts = FactorOptions { dense_threshold: 0, ..Default::default() };
        let f = factorize_with(&a, FactorKind::SymmetricIndefinite, &opts).unwrap();
        assert!(!f.is_dense());
        let b = [1.0, 2.0, 3.0];
        let x = f.solve(&b).unwrap();
        let r = a.matvec(&x).unwrap();
        for i in 0..3 {
            assert_relative_eq!(r[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let f = factorize(&SparseMatrix::identity(2), FactorKind::Spd).unwrap();
        assert!(f.solve(&[1.0]).is_err());
        assert!(f.solve_block(&DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn badly_scaled_saddle_point_system() {
        // Stiffness in the 1e11 range bordered by averaging constraints.
        let e = 2e11;
        let a = dense(
            4,
            &[
                2.0 * e, -e, 0.0, 0.5,
                -e, 2.0 * e, -e, 0.5,
                0.0, -e, e, 0.0,
                0.5, 0.5, 0.0, 0.0,
            ],
        );
        let f = factorize(&a, FactorKind::SymmetricIndefinite).unwrap();
        let b = [1.0, 0.0, -1.0, 0.25];
        let x = f.solve(&b).unwrap();
        let expected = a.to_dense().lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(x[i], expected[i], max_relative = 1e-10);
        }
    }
}
