//! Envelope (skyline) LDLᵀ without pivoting.

use crate::error::{Error, Result};

use super::SparseMatrix;

/// Pivots below this (after equilibration) are treated as zero.
pub(crate) const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct SkylineLdl {
    n: usize,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Start of each row's strictly-lower entries in `lower`.
    offsets: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    /// Factors `B = P A Pᵀ` where `perm[new] = old` and `a` has full
    /// symmetric storage. With `require_positive`, any pivot that is not
    /// clearly positive is rejected.
    pub(crate) fn factor(a: &SparseMatrix, perm: &[usize], require_positive: bool) -> Result<Self> {
        let n = a.n_rows();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                if j < i && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; offsets[n]];
        let mut diag = vec![0.0; n];
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j < i {
                    lower[offsets[i] + (j - first[i])] = v;
                } else if j == i {
                    diag[i] = v;
                }
            }
        }

        let mut g = Vec::new();
        for i in 0..n {
            let fi = first[i];
            let row = offsets[i]..offsets[i + 1];
            g.clear();
            g.extend_from_slice(&lower[row.clone()]);
            for j in fi..i {
                let fj = first[j];
                let kmin = fi.max(fj);
                let lj = &lower[offsets[j]..offsets[j + 1]];
                let mut s = g[j - fi];
                for k in kmin..j {
                    s -= g[k - fi] * lj[k - fj];
                }
                g[j - fi] = s;
            }
            let mut d = diag[i];
            for k in fi..i {
                let gk = g[k - fi];
                let l = gk / diag[k];
                d -= gk * l;
                lower[offsets[i] + (k - fi)] = l;
            }
            let reference = diag[i].abs().max(1.0);
            if require_positive {
                if !(d > PIVOT_TOL * reference) {
                    return Err(Error::NotPositiveDefinite {
                        pivot: perm[i],
                        value: d,
                    });
                }
            } else if !(d.abs() > PIVOT_TOL * reference) {
                return Err(Error::SingularMatrix { pivot: perm[i] });
            }
            diag[i] = d;
        }
        Ok(SkylineLdl {
            n,
            first,
            offsets,
            lower,
            diag,
        })
    }

    /// Solves in the permuted numbering, overwriting `y`.
    pub(crate) fn solve_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let l = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (k, &lik) in l.iter().enumerate() {
                s -= lik * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let l = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            let yi = y[i];
            for (k, &lik) in l.iter().enumerate() {
                y[fi + k] -= lik * yi;
            }
        }
    }

    pub(crate) fn envelope_size(&self) -> usize {
        self.lower.len()
    }
}
