//! Sparse direct factorizations: an SPD Laplacian and a saddle-point system.

use mlbddc::fem::{assemble_global, ProblemSpec};
use mlbddc::sparse::{factorize, FactorKind, SparseMatrix, Symmetry};

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::poisson(2);
    let (k, f) = assemble_global(&spec, &spec.build_mesh(2, 40, 1.0)?)?;
    let chol = factorize(&k, FactorKind::Spd)?;
    let u = chol.solve(&f)?;
    let r: Vec<f64> = k.matvec(&u)?.iter().zip(&f).map(|(a, b)| a - b).collect();
    println!("spd: n = {}, factor entries {}, residual {:.2e}", k.n_rows(), chol.factor_size(), norm(&r) / norm(&f));

    // [[A, B^T], [B, 0]] with one averaging constraint.
    let n = 6;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        t.push((i, n, 1.0 / n as f64));
        t.push((n, i, 1.0 / n as f64));
    }
    let kkt = SparseMatrix::from_triplets(n + 1, n + 1, &t, Symmetry::SymmetricFull)?;
    let ldl = factorize(&kkt, FactorKind::SymmetricIndefinite)?;
    let mut b = vec![1.0; n];
    b.push(0.5);
    let x = ldl.solve(&b)?;
    println!("saddle point: u = {:.4?}, multiplier {:.4}", &x[..n], x[n]);
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
