//! Iterative substructuring: subdomain block splits, the matrix-free Schur
//! complement on the interface, the condensed right-hand side and interior
//! recovery.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{factorize_with, FactorKind, FactorOptions, Factorization, SparseMatrix, Symmetry};

/// One subdomain matrix split into interior (I) and interface (B) blocks.
#[derive(Debug, Clone)]
pub struct SubdomainSplit {
    pub matrix: SparseMatrix,
    pub local_to_global: Vec<usize>,
    /// Local indices of interior dofs.
    pub interior: Vec<usize>,
    /// Local indices of interface dofs.
    pub interface: Vec<usize>,
    /// Position of each local interface dof in the global interface numbering.
    pub interface_index: Vec<usize>,
    pub k_ii: SparseMatrix,
    /// Interior rows, interface columns.
    pub k_ib: SparseMatrix,
    pub k_bb: SparseMatrix,
    interior_factor: Option<Factorization>,
}

impl SubdomainSplit {
    pub fn n_local(&self) -> usize {
        self.local_to_global.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    pub fn is_factorized(&self) -> bool {
        self.interior_factor.is_some() || self.interior.is_empty()
    }

    /// `K_II⁻¹ b`.
    pub fn interior_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n_interior() {
            return Err(Error::DimensionMismatch {
                context: "interior right-hand side",
                expected: self.n_interior(),
                found: b.len(),
            });
        }
        if self.interior.is_empty() {
            return Ok(Vec::new());
        }
        self.interior_factor
            .as_ref()
            .ok_or_else(|| Error::InvalidState("interior block is not factorized".into()))?
            .solve(b)
    }

    /// `(K_BB - K_BI K_II⁻¹ K_IB) x` on this subdomain's interface dofs.
    pub fn local_schur_apply(&self, x_b: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.k_bb.matvec(x_b)?;
        if !self.interior.is_empty() {
            let t = self.k_ib.matvec(x_b)?;
            let s = self.interior_solve(&t)?;
            let c = self.k_ib.transpose_matvec(&s)?;
            y.iter_mut().zip(c).for_each(|(a, b)| *a -= b);
        }
        Ok(y)
    }

    /// Dense local Schur complement, mainly for checks.
    pub fn local_schur_dense(&self) -> Result<DMatrix<f64>> {
        let nb = self.n_interface();
        let mut s = DMatrix::zeros(nb, nb);
        let mut e = vec![0.0; nb];
        for j in 0..nb {
            e[j] = 1.0;
            let col = self.local_schur_apply(&e)?;
            e[j] = 0.0;
            for i in 0..nb {
                s[(i, j)] = col[i];
            }
        }
        Ok(s)
    }

    pub fn interior_global(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().map(|&l| self.local_to_global[l])
    }

    fn factorize(&mut self, opts: &FactorOptions) -> Result<()> {
        if !self.interior.is_empty() {
            self.interior_factor = Some(factorize_with(&self.k_ii, FactorKind::Spd, opts)?);
        }
        Ok(())
    }
}

/// `Σ Rᵀ v` over `(indices, values)` pairs. Deterministic mode sums in
/// list order; otherwise rayon may split and regroup the sum.
pub(crate) fn scatter_add(n: usize, items: Vec<(&[usize], Vec<f64>)>, deterministic: bool) -> Vec<f64> {
    let scatter = |mut acc: Vec<f64>, (idx, v): (&[usize], Vec<f64>)| {
        for (&k, x) in idx.iter().zip(v) {
            acc[k] += x;
        }
        acc
    };
    if deterministic {
        items.into_iter().fold(vec![0.0; n], scatter)
    } else {
        items
            .into_par_iter()
            .fold(|| vec![0.0; n], scatter)
            .reduce(
                || vec![0.0; n],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// The interface problem `Ŝ û = ĝ` assembled from subdomain matrices.
#[derive(Debug, Clone)]
pub struct InterfaceProblem {
    pub level: usize,
    pub n_dofs: usize,
    /// Global dof of each interface unknown, ascending.
    pub interface_dofs: Vec<usize>,
    pub subdomains: Vec<SubdomainSplit>,
    /// Sum subdomain contributions in subdomain order.
    pub deterministic: bool,
}

impl InterfaceProblem {
    /// Splits and factorizes the interior blocks.
    pub fn new(level: usize, n_dofs: usize, parts: Vec<(SparseMatrix, Vec<usize>)>) -> Result<Self> {
        let mut p = Self::unfactored(level, n_dofs, parts)?;
        p.factorize(&FactorOptions::default())?;
        Ok(p)
    }

    /// Splits without factorizing; Schur products fail until
    /// [`InterfaceProblem::factorize`] is called.
    pub fn unfactored(level: usize, n_dofs: usize, parts: Vec<(SparseMatrix, Vec<usize>)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("subdomain list"));
        }
        let mut multiplicity = vec![0usize; n_dofs];
        for (i, (k, map)) in parts.iter().enumerate() {
            if k.n_rows() != map.len() || k.n_cols() != map.len() {
                return Err(Error::DimensionMismatch {
                    context: "subdomain matrix vs local-to-global map",
                    expected: map.len(),
                    found: k.n_rows(),
                }
                .at_subdomain(level, i));
            }
            if k.symmetry() == Symmetry::General {
                return Err(Error::InvalidMatrix(format!("subdomain {i} matrix is not symmetric")));
            }
            let mut seen = map.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != map.len() {
                return Err(Error::InvalidMatrix(format!("subdomain {i} maps two local dofs to one global dof")));
            }
            for &g in map {
                if g >= n_dofs {
                    return Err(Error::DimensionMismatch {
                        context: "local-to-global entry",
                        expected: n_dofs,
                        found: g,
                    });
                }
                multiplicity[g] += 1;
            }
        }
        if let Some(g) = multiplicity.iter().position(|&m| m == 0) {
            return Err(Error::InvalidMatrix(format!("global dof {g} belongs to no subdomain")));
        }
        let interface_dofs: Vec<usize> = (0..n_dofs).filter(|&g| multiplicity[g] >= 2).collect();
        let mut interface_pos = vec![usize::MAX; n_dofs];
        for (k, &g) in interface_dofs.iter().enumerate() {
            interface_pos[g] = k;
        }
        let subdomains = parts
            .into_iter()
            .map(|(k, map)| {
                let k = k.to_full_storage();
                let (mut interior, mut interface) = (Vec::new(), Vec::new());
                for (l, &g) in map.iter().enumerate() {
                    if multiplicity[g] >= 2 {
                        interface.push(l);
                    } else {
                        interior.push(l);
                    }
                }
                let interface_index = interface.iter().map(|&l| interface_pos[map[l]]).collect();
                SubdomainSplit {
                    k_ii: k.submatrix(&interior, &interior),
                    k_ib: k.submatrix(&interior, &interface),
                    k_bb: k.submatrix(&interface, &interface),
                    matrix: k,
                    local_to_global: map,
                    interior,
                    interface,
                    interface_index,
                    interior_factor: None,
                }
            })
            .collect();
        Ok(InterfaceProblem {
            level,
            n_dofs,
            interface_dofs,
            subdomains,
            deterministic: true,
        })
    }

    pub fn factorize(&mut self, opts: &FactorOptions) -> Result<()> {
        let level = self.level;
        self.subdomains
            .par_iter_mut()
            .enumerate()
            .map(|(i, s)| s.factorize(opts).map_err(|e| e.at_subdomain(level, i)))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    pub fn n_interface(&self) -> usize {
        self.interface_dofs.len()
    }

    pub fn n_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    /// Adds per-subdomain interface vectors into one global interface vector.
    pub(crate) fn sum_interface(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        let items = self
            .subdomains
            .iter()
            .zip(parts)
            .map(|(s, v)| (s.interface_index.as_slice(), v))
            .collect();
        scatter_add(self.n_interface(), items, self.deterministic)
    }

    fn check_interface(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.n_interface() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n_interface(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_global(&self, f: &[f64], context: &'static str) -> Result<()> {
        if f.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n_dofs,
                found: f.len(),
            });
        }
        Ok(())
    }

    /// `Ŝ x = Σ R_iᵀ S_i R_i x` without forming `Ŝ`.
    pub fn schur_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_interface(x, "interface vector")?;
        let parts = self
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let xb: Vec<f64> = s.interface_index.iter().map(|&k| x[k]).collect();
                s.local_schur_apply(&xb).map_err(|e| e.at_subdomain(self.level, i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.sum_interface(parts))
    }

    /// `ĝ = f_Γ - Σ R_iᵀ K_BI K_II⁻¹ f_I` from the global load vector.
    pub fn condensed_rhs(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_global(f, "global right-hand side")?;
        let parts = self
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                if s.interior.is_empty() {
                    return Ok(vec![0.0; s.n_interface()]);
                }
                let fi: Vec<f64> = s.interior_global().map(|g| f[g]).collect();
                let u = s.interior_solve(&fi).map_err(|e| e.at_subdomain(self.level, i))?;
                Ok(s.k_ib.transpose_matvec(&u)?.into_iter().map(|v| -v).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = self.sum_interface(parts);
        for (gk, &dof) in g.iter_mut().zip(&self.interface_dofs) {
            *gk += f[dof];
        }
        Ok(g)
    }

    /// Full solution from interface values: `x_I = K_II⁻¹ (f_I - K_IB û)`.
    pub fn recover_interior(&self, u_hat: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        self.check_interface(u_hat, "interface solution")?;
        self.check_global(f, "global right-hand side")?;
        let interiors = self
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                if s.interior.is_empty() {
                    return Ok(Vec::new());
                }
                let ub: Vec<f64> = s.interface_index.iter().map(|&k| u_hat[k]).collect();
                let kub = s.k_ib.matvec(&ub)?;
                let rhs: Vec<f64> = s.interior_global().zip(kub).map(|(g, v)| f[g] - v).collect();
                s.interior_solve(&rhs).map_err(|e| e.at_subdomain(self.level, i))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut x = vec![0.0; self.n_dofs];
        for (&g, &u) in self.interface_dofs.iter().zip(u_hat) {
            x[g] = u;
        }
        for (s, xi) in self.subdomains.iter().zip(interiors) {
            for (g, v) in s.interior_global().zip(xi) {
                x[g] = v;
            }
        }
        Ok(x)
    }

    /// Column-by-column dense `Ŝ`; only sensible for small problems.
    pub fn schur_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n_interface();
        let mut s = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.schur_apply(&e)?;
            e[j] = 0.0;
            s.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_global, subassemble_subdomain, ProblemSpec};
    use crate::partition::{partition_elements, PartitionMethod};
    use proptest::prelude::*;

    /// Three dofs in a chain, two subdomains sharing the middle one:
    /// K_1 = K_2 = [[2,-1],[-1,1]] in (interior, interface) order.
    fn chain() -> InterfaceProblem {
        let k = SparseMatrix::from_dense(
            &DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]),
            Symmetry::SymmetricFull,
        )
        .unwrap();
        InterfaceProblem::new(1, 3, vec![(k.clone(), vec![0, 1]), (k, vec![2, 1])]).unwrap()
    }

    #[test]
    fn chain_schur_and_rhs() {
        let p = chain();
        assert_eq!(p.interface_dofs, vec![1]);
        let s = p.schur_apply(&[1.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14);
        let g = p.condensed_rhs(&[1.0, 1.0, 1.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-14);
        let x = p.recover_interior(&[2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[2] - 1.5).abs() < 1e-14 && x[1] == 2.0);
    }

    #[test]
    fn unfactorized_interiors_error() {
        let k = SparseMatrix::identity(2);
        let p = InterfaceProblem::unfactored(1, 3, vec![(k.clone(), vec![0, 1]), (k, vec![2, 1])]).unwrap();
        assert!(p.schur_apply(&[1.0]).is_err());
    }

    #[test]
    fn uncovered_dof_errors() {
        let k = SparseMatrix::identity(2);
        assert!(InterfaceProblem::new(1, 4, vec![(k.clone(), vec![0, 1]), (k, vec![2, 1])]).is_err());
    }

    fn poisson_problem(dim: usize, n: usize, parts: usize) -> (InterfaceProblem, SparseMatrix, Vec<f64>) {
        let spec = ProblemSpec::poisson(dim);
        let mesh = spec.build_mesh(dim, n, 1.0).unwrap();
        let (k, f) = assemble_global(&spec, &mesh).unwrap();
        let p = partition_elements(&mesh, parts, PartitionMethod::RegularBlocks, 1).unwrap();
        let subs = p
            .subdomain_elements()
            .iter()
            .map(|e| subassemble_subdomain(&spec, &mesh, e).unwrap())
            .collect();
        (InterfaceProblem::new(1, k.n_rows(), subs).unwrap(), k, f)
    }

    /// Dense oracle: `S = K_ΓΓ - K_ΓI K_II⁻¹ K_IΓ` from the global matrix.
    fn dense_schur(k: &SparseMatrix, gamma: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
        let kd = k.to_dense();
        let n = kd.nrows();
        let inner: Vec<usize> = (0..n).filter(|i| !gamma.contains(i)).collect();
        let pick = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| kd[(r[i], c[j])]);
        let kgg = pick(gamma, gamma);
        let kgi = pick(gamma, &inner);
        let kii = pick(&inner, &inner);
        let s = kgg - &kgi * kii.cholesky().unwrap().solve(&kgi.transpose());
        (s, inner)
    }

    #[test]
    fn matches_dense_schur_complement() {
        let (p, k, f) = poisson_problem(2, 6, 4);
        let (s_oracle, inner) = dense_schur(&k, &p.interface_dofs);
        let s = p.schur_dense().unwrap();
        assert!((&s - &s_oracle).amax() < 1e-12 * s_oracle.amax());

        // Condensed rhs and full solve against a direct dense solve.
        let kd = k.to_dense();
        let x_direct = kd.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(f.clone()));
        let g = p.condensed_rhs(&f).unwrap();
        let u = s.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(g));
        let x = p.recover_interior(u.as_slice(), &f).unwrap();
        for i in 0..x.len() {
            assert!((x[i] - x_direct[i]).abs() < 1e-12);
        }
        assert!(!inner.is_empty());
    }

    #[test]
    fn nondeterministic_sum_agrees() {
        let (mut p, _, _) = poisson_problem(3, 4, 8);
        let x: Vec<f64> = (0..p.n_interface()).map(|i| (i as f64).sin()).collect();
        let a = p.schur_apply(&x).unwrap();
        p.deterministic = false;
        let b = p.schur_apply(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn schur_is_symmetric_positive_definite(
            x in prop::collection::vec(-1.0f64..1.0, 5 * 5 - 9),
            y in prop::collection::vec(-1.0f64..1.0, 5 * 5 - 9),
        ) {
            // 2D, 6x6 elements, 2x2 subdomains: 2*5 - 1 interface dofs.
            let (p, _, _) = poisson_problem(2, 6, 4);
            let n = p.n_interface();
            let (x, y) = (&x[..n], &y[..n]);
            let sx = p.schur_apply(x).unwrap();
            let sy = p.schur_apply(y).unwrap();
            let xsy: f64 = x.iter().zip(&sy).map(|(a, b)| a * b).sum();
            let ysx: f64 = y.iter().zip(&sx).map(|(a, b)| a * b).sum();
            prop_assert!((xsy - ysx).abs() <= 1e-12 * (1.0 + xsy.abs()));
            let xsx: f64 = x.iter().zip(&sx).map(|(a, b)| a * b).sum();
            let xx: f64 = x.iter().map(|a| a * a).sum();
            if xx > 1e-12 {
                prop_assert!(xsx > 0.0);
            }
        }
    }
}
