//! Preconditioned conjugate gradients with a Lanczos condition estimate,
//! and left-preconditioned BiCGstab. Both start from a zero initial guess.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2};
use crate::sparse::tridiag_extreme_eigenvalues;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_IT: usize = 1000;

/// True residual is recomputed from scratch this often.
const RESIDUAL_REFRESH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    /// `‖b - A x‖ / ‖b‖`.
    Unpreconditioned,
    /// `‖M (b - A x)‖ / ‖M b‖`.
    Preconditioned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Entry 0 is the initial ratio (1 for a nonzero right-hand side).
    pub relative_residuals: Vec<f64>,
    pub residual_kind: ResidualKind,
    /// `‖b - A x‖ / ‖b‖` at exit.
    pub final_relative_residual: f64,
    /// PCG only: λmax/λmin of the Lanczos tridiagonal.
    pub condition_estimate: Option<f64>,
    pub converged: bool,
    pub breakdown_reason: Option<String>,
}

impl SolveReport {
    fn trivial(kind: ResidualKind) -> Self {
        SolveReport {
            iterations: 0,
            relative_residuals: vec![0.0],
            residual_kind: kind,
            final_relative_residual: 0.0,
            condition_estimate: None,
            converged: true,
            breakdown_reason: None,
        }
    }
}

fn checked(out: Vec<f64>, n: usize, what: &'static str) -> Result<Vec<f64>> {
    if out.len() != n {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: n,
            found: out.len(),
        });
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} produced a non-finite value")));
    }
    Ok(out)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn residual<A>(apply_a: &A, b: &[f64], x: &[f64]) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let ax = checked(apply_a(x)?, b.len(), "operator")?;
    Ok(b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect())
}

/// Condition number of the Lanczos tridiagonal built from PCG step lengths
/// `alpha` and direction updates `beta` (one fewer than `alpha`).
pub fn lanczos_condition(alpha: &[f64], beta: &[f64]) -> Option<f64> {
    if alpha.is_empty() {
        return None;
    }
    let k = alpha.len();
    let diag: Vec<f64> = (0..k)
        .map(|j| {
            let mut d = 1.0 / alpha[j];
            if j > 0 {
                d += beta[j - 1] / alpha[j - 1];
            }
            d
        })
        .collect();
    let off: Vec<f64> = (0..k - 1).map(|j| beta[j].sqrt() / alpha[j]).collect();
    let (lo, hi) = tridiag_extreme_eigenvalues(&diag, &off).ok()?;
    (lo > 0.0).then(|| (hi / lo).max(1.0))
}

/// Preconditioned conjugate gradients for SPD `A` and `M`.
pub fn pcg<A, M>(apply_a: A, apply_m: M, b: &[f64], tol: f64, max_it: usize) -> Result<(Vec<f64>, SolveReport)>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    M: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport::trivial(ResidualKind::Unpreconditioned)));
    }
    let mut r = b.to_vec();
    let mut z = checked(apply_m(&r)?, n, "preconditioner")?;
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut report = SolveReport {
        iterations: 0,
        relative_residuals: vec![1.0],
        residual_kind: ResidualKind::Unpreconditioned,
        final_relative_residual: 1.0,
        condition_estimate: None,
        converged: false,
        breakdown_reason: None,
    };
    if !(rz > 0.0) {
        report.breakdown_reason = Some(format!("preconditioner not SPD: rᵀMr = {rz:e}"));
        return Ok((x, report));
    }
    for k in 1..=max_it {
        let q = checked(apply_a(&p)?, n, "operator")?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            report.breakdown_reason = Some(format!("operator not SPD: pᵀAp = {pq:e}"));
            break;
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        if k % RESIDUAL_REFRESH == 0 {
            r = residual(&apply_a, b, &x)?;
        } else {
            axpy(&mut r, -alpha, &q);
        }
        alphas.push(alpha);
        report.iterations = k;
        let rel = norm2(&r) / bnorm;
        report.relative_residuals.push(rel);
        report.final_relative_residual = rel;
        if rel <= tol {
            report.converged = true;
            break;
        }
        z = checked(apply_m(&r)?, n, "preconditioner")?;
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            report.breakdown_reason = Some(format!("preconditioner not SPD: rᵀMr = {rz_new:e}"));
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    betas.truncate(alphas.len().saturating_sub(1));
    report.condition_estimate = lanczos_condition(&alphas, &betas);
    Ok((x, report))
}

/// BiCGstab on `M A x = M b`. Convergence is judged on the true residual
/// `‖b - A x‖/‖b‖`; the recorded history holds preconditioned residuals.
pub fn bicgstab<A, M>(apply_a: A, apply_m: M, b: &[f64], tol: f64, max_it: usize) -> Result<(Vec<f64>, SolveReport)>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    M: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport::trivial(ResidualKind::Preconditioned)));
    }
    let mut r_true = b.to_vec();
    let mut r = checked(apply_m(b)?, n, "preconditioner")?;
    let mb_norm = norm2(&r);
    let mut report = SolveReport {
        iterations: 0,
        relative_residuals: vec![1.0],
        residual_kind: ResidualKind::Preconditioned,
        final_relative_residual: 1.0,
        condition_estimate: None,
        converged: false,
        breakdown_reason: None,
    };
    if mb_norm == 0.0 {
        report.breakdown_reason = Some("preconditioner annihilates the right-hand side".into());
        return Ok((x, report));
    }
    let shadow = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 1..=max_it {
        let rho_new = dot(&shadow, &r);
        if rho_new.abs() < 1e-30 * norm2(&shadow) * norm2(&r) || rho_new == 0.0 {
            report.breakdown_reason = Some(format!("rho breakdown ({rho_new:e})"));
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ap = checked(apply_a(&p)?, n, "operator")?;
        v = checked(apply_m(&ap)?, n, "preconditioner")?;
        let sv = dot(&shadow, &v);
        if sv.abs() < 1e-30 * norm2(&shadow) * norm2(&v) || sv == 0.0 {
            report.breakdown_reason = Some(format!("rho breakdown in step length ({sv:e})"));
            break;
        }
        alpha = rho / sv;
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        let mut s_true = r_true.clone();
        axpy(&mut s_true, -alpha, &ap);
        report.iterations = k;
        let half = norm2(&s_true) / bnorm;
        if half <= tol {
            axpy(&mut x, alpha, &p);
            let exact = residual(&apply_a, b, &x)?;
            report.final_relative_residual = norm2(&exact) / bnorm;
            report.relative_residuals.push(norm2(&s) / mb_norm);
            if report.final_relative_residual <= tol {
                report.converged = true;
                break;
            }
            // Drifted recursion: restart the residuals from the iterate.
            r_true = exact;
            r = checked(apply_m(&r_true)?, n, "preconditioner")?;
            continue;
        }
        let as_ = checked(apply_a(&s)?, n, "operator")?;
        let t = checked(apply_m(&as_)?, n, "preconditioner")?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        if omega.abs() < 1e-30 {
            report.breakdown_reason = Some(format!("omega breakdown ({omega:e})"));
            break;
        }
        axpy(&mut x, alpha, &p);
        axpy(&mut x, omega, &s);
        if k % RESIDUAL_REFRESH == 0 {
            r_true = residual(&apply_a, b, &x)?;
            r = checked(apply_m(&r_true)?, n, "preconditioner")?;
        } else {
            r = s;
            axpy(&mut r, -omega, &t);
            r_true = s_true;
            axpy(&mut r_true, -omega, &as_);
        }
        report.relative_residuals.push(norm2(&r) / mb_norm);
        let rel = norm2(&r_true) / bnorm;
        report.final_relative_residual = rel;
        if rel <= tol {
            let exact = norm2(&residual(&apply_a, b, &x)?) / bnorm;
            report.final_relative_residual = exact;
            if exact <= tol {
                report.converged = true;
                break;
            }
            r_true = residual(&apply_a, b, &x)?;
            r = checked(apply_m(&r_true)?, n, "preconditioner")?;
        }
    }
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_op(a: DMatrix<f64>) -> impl Fn(&[f64]) -> Result<Vec<f64>> {
        move |x| Ok((&a * DVector::from_column_slice(x)).as_slice().to_vec())
    }

    fn ident(x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() / n as f64 + DMatrix::identity(n, n)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = [1.0, -2.0, 3.0];
        let (x, rep) = pcg(ident, ident, &b, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b.to_vec());
        assert!((rep.condition_estimate.unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(rep.relative_residuals[0], 1.0);
    }

    #[test]
    fn diagonal_one_four() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let (x, rep) = pcg(dense_op(a), ident, &[1.0, 1.0], 1e-12, 10).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
        assert!((rep.condition_estimate.unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn exact_preconditioner() {
        let a = random_spd(10, 1);
        let inv = a.clone().try_inverse().unwrap();
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
        let (x, rep) = pcg(dense_op(a.clone()), dense_op(inv), &b, 1e-10, 50).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((rep.condition_estimate.unwrap() - 1.0).abs() < 1e-8);
        let oracle = a.lu().solve(&DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn condition_estimate_matches_spectrum_and_grows() {
        let a = random_spd(30, 7);
        let ev = a.clone().symmetric_eigen().eigenvalues;
        let kappa = ev.max() / ev.min();
        let b = vec![1.0; 30];
        let mut last = 0.0;
        for it in 1..=30 {
            let (_, rep) = pcg(dense_op(a.clone()), ident, &b, 0.0, it).unwrap();
            let k = rep.condition_estimate.unwrap();
            assert!(k >= last * (1.0 - 1e-10));
            last = k;
            if rep.converged {
                break;
            }
        }
        assert!((last - kappa).abs() < 1e-3 * kappa);
    }

    #[test]
    fn converges_within_n_iterations() {
        let a = random_spd(40, 3);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let (_, rep) = pcg(dense_op(a), ident, &b, 1e-8, 1000).unwrap();
        assert!(rep.converged && rep.iterations <= 40);
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let (_, rep) = pcg(dense_op(a), ident, &[0.0, 1.0], 1e-8, 10).unwrap();
        assert!(!rep.converged);
        assert!(rep.breakdown_reason.unwrap().contains("not SPD"));
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let a = random_spd(20, 4);
        let (_, rep) = pcg(dense_op(a), ident, &[1.0; 20], 1e-12, 3).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn zero_rhs() {
        let (x, rep) = pcg(ident, ident, &[0.0, 0.0], 1e-6, 10).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(rep.converged && rep.iterations == 0);
    }

    #[test]
    fn bicgstab_identity() {
        let b = [2.0, 3.0];
        let (x, rep) = bicgstab(ident, ident, &b, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn bicgstab_agrees_with_pcg_on_spd() {
        let a = random_spd(25, 5);
        let m = DMatrix::from_diagonal(&a.diagonal().map(|d| 1.0 / d));
        let b: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
        let tol = 1e-8;
        let (x1, r1) = pcg(dense_op(a.clone()), dense_op(m.clone()), &b, tol, 200).unwrap();
        let (x2, r2) = bicgstab(dense_op(a), dense_op(m), &b, tol, 200).unwrap();
        assert!(r1.converged && r2.converged);
        let scale = x1.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() <= 10.0 * tol * scale * 25.0);
        }
    }

    #[test]
    fn bicgstab_nonsymmetric_shift() {
        let mut a = DMatrix::identity(5, 5);
        for i in 0..4 {
            a[(i, i + 1)] = 0.3;
        }
        let b = [1.0, 0.0, 0.0, 0.0, 0.0];
        let tol = 1e-10;
        let (x, rep) = bicgstab(dense_op(a.clone()), ident, &b, tol, 50).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.residual_kind, ResidualKind::Preconditioned);
        let oracle = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for (u, v) in x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() <= tol);
        }
    }

    #[test]
    fn operator_shape_errors() {
        let bad = |_: &[f64]| Ok(vec![1.0]);
        assert!(pcg(bad, ident, &[1.0, 1.0], 1e-6, 5).is_err());
    }
}
