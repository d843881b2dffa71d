//! Dense symmetric indefinite LDLᵀ with Bunch–Kaufman 1×1 / 2×2 pivoting.

use crate::error::{Error, Result};

use super::skyline::PIVOT_TOL;

#[derive(Debug, Clone, Copy)]
enum Block {
    One(usize),
    Two(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct DenseBunchKaufman {
    n: usize,
    /// Row-major; strict lower part holds L, diagonal blocks hold D.
    a: Vec<f64>,
    /// `perm[i]` = original row at factored position `i`.
    perm: Vec<usize>,
    blocks: Vec<Block>,
}

impl DenseBunchKaufman {
    /// Factors a dense symmetric matrix given in row-major order.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let idx = |i: usize, j: usize| i * n + j;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut col1 = vec![0.0; n];
        let mut col2 = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];

        let mut k = 0;
        while k < n {
            let absakk = a[idx(k, k)].abs();
            let mut imax = k;
            let mut colmax = 0.0;
            for i in k + 1..n {
                let v = a[idx(i, k)].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) <= PIVOT_TOL {
                return Err(Error::SingularMatrix { pivot: perm[k] });
            }
            let (kp, kstep) = if absakk >= alpha * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(a[idx(imax, j)].abs());
                    }
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    (k, 1)
                } else if a[idx(imax, imax)].abs() >= alpha * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + kstep - 1;
            if kp != kk {
                for j in 0..n {
                    a.swap(idx(kp, j), idx(kk, j));
                }
                for i in 0..n {
                    a.swap(idx(i, kp), idx(i, kk));
                }
                perm.swap(kp, kk);
            }

            if kstep == 1 {
                let d = a[idx(k, k)];
                if d.abs() <= PIVOT_TOL {
                    return Err(Error::SingularMatrix { pivot: perm[k] });
                }
                for i in k + 1..n {
                    col1[i] = a[idx(i, k)];
                    l1[i] = col1[i] / d;
                }
                for i in k + 1..n {
                    let li = l1[i];
                    if li == 0.0 {
                        continue;
                    }
                    for j in k + 1..n {
                        a[idx(i, j)] -= li * col1[j];
                    }
                }
                for i in k + 1..n {
                    a[idx(i, k)] = l1[i];
                }
                blocks.push(Block::One(k));
            } else {
                let d11 = a[idx(k, k)];
                let d21 = a[idx(k + 1, k)];
                let d22 = a[idx(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                if det.abs() <= PIVOT_TOL * d21 * d21 {
                    return Err(Error::SingularMatrix { pivot: perm[k] });
                }
                for i in k + 2..n {
                    col1[i] = a[idx(i, k)];
                    col2[i] = a[idx(i, k + 1)];
                    l1[i] = (col1[i] * d22 - col2[i] * d21) / det;
                    l2[i] = (col2[i] * d11 - col1[i] * d21) / det;
                }
                for i in k + 2..n {
                    let (a1, a2) = (l1[i], l2[i]);
                    for j in k + 2..n {
                        a[idx(i, j)] -= a1 * col1[j] + a2 * col2[j];
                    }
                }
                for i in k + 2..n {
                    a[idx(i, k)] = l1[i];
                    a[idx(i, k + 1)] = l2[i];
                }
                blocks.push(Block::Two(k));
            }
            k += kstep;
        }
        Ok(DenseBunchKaufman { n, a, perm, blocks })
    }

    /// Solves `A x = b` in the original numbering.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let a = &self.a;
        let idx = |i: usize, j: usize| i * n + j;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for block in &self.blocks {
            match *block {
                Block::One(k) => {
                    let yk = y[k];
                    for i in k + 1..n {
                        y[i] -= a[idx(i, k)] * yk;
                    }
                }
                Block::Two(k) => {
                    let (y0, y1) = (y[k], y[k + 1]);
                    for i in k + 2..n {
                        y[i] -= a[idx(i, k)] * y0 + a[idx(i, k + 1)] * y1;
                    }
                }
            }
        }
        for block in &self.blocks {
            match *block {
                Block::One(k) => y[k] /= a[idx(k, k)],
                Block::Two(k) => {
                    let d11 = a[idx(k, k)];
                    let d21 = a[idx(k + 1, k)];
                    let d22 = a[idx(k + 1, k + 1)];
                    let det = d11 * d22 - d21 * d21;
                    let (y0, y1) = (y[k], y[k + 1]);
                    y[k] = (d22 * y0 - d21 * y1) / det;
                    y[k + 1] = (d11 * y1 - d21 * y0) / det;
                }
            }
        }
        for block in self.blocks.iter().rev() {
            match *block {
                Block::One(k) => {
                    let mut s = y[k];
                    for i in k + 1..n {
                        s -= a[idx(i, k)] * y[i];
                    }
                    y[k] = s;
                }
                Block::Two(k) => {
                    let (mut s0, mut s1) = (y[k], y[k + 1]);
                    for i in k + 2..n {
                        s0 -= a[idx(i, k)] * y[i];
                        s1 -= a[idx(i, k + 1)] * y[i];
                    }
                    y[k] = s0;
                    y[k + 1] = s1;
                }
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }
}
