use crate::error::{Error, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], offdiag: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { offdiag[i - 1] * offdiag[i - 1] };
        q = if i == 0 { diag[0] - x } else { diag[i] - x - e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1e-300);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue by bisection on the Sturm count.
fn kth_eigenvalue(diag: &[f64], offdiag: &[f64], k: usize, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, offdiag, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn gershgorin(diag: &[f64], offdiag: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { offdiag[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { offdiag[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) * n as f64;
    (lo - pad, hi + pad)
}

fn check(diag: &[f64], offdiag: &[f64]) -> Result<()> {
    if diag.is_empty() {
        return Err(Error::EmptyInput("tridiagonal matrix"));
    }
    if offdiag.len() + 1 != diag.len() {
        return Err(Error::DimensionMismatch {
            context: "tridiagonal off-diagonal",
            expected: diag.len() - 1,
            found: offdiag.len(),
        });
    }
    Ok(())
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tridiag_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Result<Vec<f64>> {
    check(diag, offdiag)?;
    let (lo, hi) = gershgorin(diag, offdiag);
    Ok((0..diag.len())
        .map(|k| kth_eigenvalue(diag, offdiag, k, lo, hi))
        .collect())
}

/// Smallest and largest eigenvalue only.
pub fn tridiag_extreme_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Result<(f64, f64)> {
    check(diag, offdiag)?;
    let (lo, hi) = gershgorin(diag, offdiag);
    let n = diag.len();
    Ok((
        kth_eigenvalue(diag, offdiag, 0, lo, hi),
        kth_eigenvalue(diag, offdiag, n - 1, lo, hi),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn one_by_one() {
        assert_eq!(tridiag_eigenvalues(&[5.0], &[]).unwrap(), vec![5.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let ev = tridiag_eigenvalues(&[2.0, 2.0], &[-1.0]).unwrap();
        assert_relative_eq!(ev[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(ev[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn three_by_three_characteristic_polynomial() {
        // det(T - x I) = (2-x)((2-x)^2 - 2): roots 2-√2, 2, 2+√2.
        let ev = tridiag_eigenvalues(&[2.0, 2.0, 2.0], &[-1.0, -1.0]).unwrap();
        let s = 2f64.sqrt();
        assert_relative_eq!(ev[0], 2.0 - s, max_relative = 1e-12);
        assert_relative_eq!(ev[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(ev[2], 2.0 + s, max_relative = 1e-12);
    }

    #[test]
    fn empty_input_errors() {
        assert!(tridiag_eigenvalues(&[], &[]).is_err());
        assert!(tridiag_eigenvalues(&[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn widely_spread_spectrum_keeps_relative_accuracy() {
        let ev = tridiag_eigenvalues(&[1e-4, 1e4], &[0.0]).unwrap();
        assert_relative_eq!(ev[0], 1e-4, max_relative = 1e-8);
        assert_relative_eq!(ev[1], 1e4, max_relative = 1e-8);
    }

    proptest! {
        #[test]
        fn matches_dense_symmetric_eigen(
            diag in prop::collection::vec(-10.0f64..10.0, 1..12),
            seed in prop::collection::vec(-3.0f64..3.0, 12),
        ) {
            let n = diag.len();
            let off: Vec<f64> = seed[..n - 1].to_vec();
            let mut t = DMatrix::zeros(n, n);
            for i in 0..n {
                t[(i, i)] = diag[i];
                if i + 1 < n {
                    t[(i, i + 1)] = off[i];
                    t[(i + 1, i)] = off[i];
                }
            }
            let mut oracle: Vec<f64> = t.symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ev = tridiag_eigenvalues(&diag, &off).unwrap();
            let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in ev.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
            let (lo, hi) = tridiag_extreme_eigenvalues(&diag, &off).unwrap();
            prop_assert_eq!(lo, ev[0]);
            prop_assert_eq!(hi, ev[n - 1]);
        }
    }
}
