//! Multilevel BDDC: constraints, energy-minimal coarse basis functions,
//! recursive set-up over a hierarchy of pseudo-meshes, and the
//! preconditioner application with interior pre/post-corrections on the
//! levels above the first.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_elements, subassemble_subdomain, Mesh, ProblemSpec};
pub use crate::interface::{ConstraintPolicy, CornerSelection, WeightScheme};
use crate::interface::{build_weights, classify_interface, coarse_nodes, select_corners, CoarseNode, CoarseNodeKind, GlobSet};
use crate::partition::{build_pseudomesh, partition_auto, partition_elements, LevelMesh, LevelPartition, PartitionMethod};
use crate::sparse::{factorize_with, FactorKind, FactorOptions, Factorization, SparseMatrix, Symmetry};
use crate::substructuring::{scatter_add, InterfaceProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Corner,
    EdgeAverage,
    FaceAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub kind: ConstraintKind,
    pub component: usize,
    /// Coarse node the row belongs to.
    pub coarse_node: usize,
    pub glob: Option<usize>,
    /// `(local dof, coefficient)`.
    pub entries: Vec<(usize, f64)>,
}

/// `C_i` and `R_Ci` of one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainConstraints {
    pub n_local: usize,
    pub rows: Vec<ConstraintRow>,
    /// Global coarse dof of each row.
    pub coarse_map: Vec<usize>,
}

impl SubdomainConstraints {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.rows.len(), self.n_local);
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                c[(r, j)] = v;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    pub policy: ConstraintPolicy,
    pub subdomains: Vec<SubdomainConstraints>,
    pub n_coarse: usize,
    pub coarse_nodes: Vec<CoarseNode>,
    /// Per coarse node, per component: global coarse dof.
    pub coarse_node_dofs: Vec<Vec<Option<usize>>>,
}

/// Builds `C_i` for every subdomain. `local_to_global[i]` maps local dofs
/// of subdomain `i` to level dofs; `anchored[i]` marks subdomains whose
/// matrix is nonsingular without constraints.
pub fn build_constraints(
    globs: &GlobSet,
    mesh: &LevelMesh,
    local_to_global: &[Vec<usize>],
    anchored: &[bool],
    policy: ConstraintPolicy,
) -> Result<ConstraintMatrix> {
    if local_to_global.len() != globs.n_subdomains || anchored.len() != globs.n_subdomains {
        return Err(Error::DimensionMismatch {
            context: "subdomain count",
            expected: globs.n_subdomains,
            found: local_to_global.len(),
        });
    }
    let nodes = coarse_nodes(globs, mesh, policy);
    let mut next = 0;
    let mut coarse_node_dofs = Vec::with_capacity(nodes.len());
    let mut node_component_dofs = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let comps = node.component_dofs(mesh);
        coarse_node_dofs.push(
            comps
                .iter()
                .map(|d| {
                    (!d.is_empty()).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect::<Vec<_>>(),
        );
        node_component_dofs.push(comps);
    }
    let mut subdomains: Vec<SubdomainConstraints> = local_to_global
        .iter()
        .map(|map| SubdomainConstraints {
            n_local: map.len(),
            rows: Vec::new(),
            coarse_map: Vec::new(),
        })
        .collect();
    for (k, node) in nodes.iter().enumerate() {
        let kind = match node.kind {
            CoarseNodeKind::Corner => ConstraintKind::Corner,
            CoarseNodeKind::EdgeAverage => ConstraintKind::EdgeAverage,
            CoarseNodeKind::FaceAverage => ConstraintKind::FaceAverage,
        };
        for &s in &node.subdomains {
            let map = &local_to_global[s];
            let local = |g: usize| {
                map.binary_search(&g).map_err(|_| {
                    Error::InvalidState(format!("coarse node {k} touches dof {g} outside subdomain {s}"))
                })
            };
            for (c, dofs) in node_component_dofs[k].iter().enumerate() {
                let Some(global) = coarse_node_dofs[k][c] else { continue };
                let w = 1.0 / dofs.len() as f64;
                let entries = dofs.iter().map(|&g| Ok((local(g)?, w))).collect::<Result<Vec<_>>>()?;
                subdomains[s].rows.push(ConstraintRow {
                    kind,
                    component: c,
                    coarse_node: k,
                    glob: node.glob,
                    entries,
                });
                subdomains[s].coarse_map.push(global);
            }
        }
    }
    for (i, sc) in subdomains.iter().enumerate() {
        if sc.rows.is_empty() && !anchored[i] && globs.n_subdomains > 1 {
            return Err(Error::InsufficientConstraints {
                subdomain: i,
                reason: "floating subdomain without any coarse constraint".into(),
            });
        }
    }
    Ok(ConstraintMatrix {
        policy,
        subdomains,
        n_coarse: next,
        coarse_nodes: nodes,
        coarse_node_dofs,
    })
}

/// Solver for `[[K, Cᵀ], [C, 0]] [x; λ] = [r; g]`.
#[derive(Debug, Clone)]
enum BorderedSolver {
    /// Factorization of the bordered matrix itself.
    Direct { n: usize, factor: Factorization },
    /// Augmented form: `K + ρ CᵀC` is SPD whenever the constraints control
    /// the kernel of `K`, and the multipliers follow from a small dense
    /// system.
    Augmented {
        factor: Factorization,
        c: DMatrix<f64>,
        kinv_ct: DMatrix<f64>,
        schur: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        rho: f64,
    },
}

impl BorderedSolver {
    fn new(k: &SparseMatrix, c: &DMatrix<f64>, opts: &FactorOptions) -> Result<Self> {
        let n = k.n_rows();
        let nc = c.nrows();
        let k = k.to_full_storage();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(k.nnz() + 2 * c.len());
        for i in 0..n {
            triplets.extend(k.row(i).map(|(j, v)| (i, j, v)));
        }
        let row_nz: Vec<Vec<(usize, f64)>> = (0..nc)
            .map(|r| (0..n).filter(|&j| c[(r, j)] != 0.0).map(|j| (j, c[(r, j)])).collect())
            .collect();
        if n + nc <= opts.dense_threshold {
            for (r, nz) in row_nz.iter().enumerate() {
                for &(j, v) in nz {
                    triplets.push((n + r, j, v));
                    triplets.push((j, n + r, v));
                }
            }
            let b = SparseMatrix::from_triplets(n + nc, n + nc, &triplets, Symmetry::SymmetricFull)?;
            let factor = factorize_with(&b, FactorKind::SymmetricIndefinite, opts)?;
            return Ok(BorderedSolver::Direct { n, factor });
        }
        let rho = k.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for nz in &row_nz {
            for &(a, va) in nz {
                for &(b, vb) in nz {
                    triplets.push((a, b, rho * va * vb));
                }
            }
        }
        let kr = SparseMatrix::from_triplets(n, n, &triplets, Symmetry::SymmetricFull)?;
        let factor = factorize_with(&kr, FactorKind::Spd, opts)?;
        let kinv_ct = factor.solve_block(&c.transpose())?;
        let s = c * &kinv_ct;
        let s = (&s + s.transpose()) * 0.5;
        let schur = s
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix { pivot: n })?;
        Ok(BorderedSolver::Augmented {
            factor,
            c: c.clone(),
            kinv_ct,
            schur,
            rho,
        })
    }

    fn solve(&self, r: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            BorderedSolver::Direct { n, factor } => {
                let mut rhs = r.to_vec();
                rhs.extend_from_slice(g);
                let mut x = factor.solve(&rhs)?;
                let lambda = x.split_off(*n);
                Ok((x, lambda))
            }
            BorderedSolver::Augmented {
                factor,
                c,
                kinv_ct,
                schur,
                rho,
            } => {
                let y = DVector::from_vec(factor.solve(r)?);
                let g = DVector::from_column_slice(g);
                let mu = schur.solve(&(c * &y - &g));
                let x = y - kinv_ct * &mu;
                let lambda = mu + g * *rho;
                Ok((x.as_slice().to_vec(), lambda.as_slice().to_vec()))
            }
        }
    }

    fn solve_block(&self, r: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            BorderedSolver::Direct { n, factor } => {
                let mut rhs = DMatrix::zeros(n + g.nrows(), r.ncols());
                rhs.rows_mut(0, *n).copy_from(r);
                rhs.rows_mut(*n, g.nrows()).copy_from(g);
                let x = factor.solve_block(&rhs)?;
                Ok((x.rows(0, *n).into_owned(), x.rows(*n, g.nrows()).into_owned()))
            }
            BorderedSolver::Augmented {
                factor,
                c,
                kinv_ct,
                schur,
                rho,
            } => {
                let y = factor.solve_block(r)?;
                let mu = schur.solve(&(c * &y - g));
                let x = y - kinv_ct * &mu;
                let lambda = mu + g * *rho;
                Ok((x, lambda))
            }
        }
    }
}

/// Ψ, Λ and `K_C` of one subdomain plus the bordered solver reused by the
/// subdomain corrections.
#[derive(Debug, Clone)]
pub struct CoarseBasis {
    pub psi: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// `-(Λ + Λᵀ)/2`.
    pub coarse_matrix: DMatrix<f64>,
    solver: BorderedSolver,
}

impl CoarseBasis {
    /// Subdomain correction: `z` from `[[K, Cᵀ], [C, 0]] [z; μ] = [r; 0]`.
    pub fn correction(&self, r: &[f64]) -> Result<Vec<f64>> {
        let g = vec![0.0; self.psi.ncols()];
        Ok(self.solver.solve(r, &g)?.0)
    }
}

/// Energy-minimal basis with `C Ψ = I`; errors if the bordered matrix is
/// singular or the two expressions for `K_C` disagree.
pub fn coarse_basis(k: &SparseMatrix, c: &DMatrix<f64>) -> Result<CoarseBasis> {
    coarse_basis_with(k, c, &FactorOptions::default())
}

pub fn coarse_basis_with(k: &SparseMatrix, c: &DMatrix<f64>, opts: &FactorOptions) -> Result<CoarseBasis> {
    let n = k.n_rows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "constraint matrix columns",
            expected: n,
            found: c.ncols(),
        });
    }
    let nc = c.nrows();
    let solver = BorderedSolver::new(k, c, opts)?;
    let (psi, lambda) = solver.solve_block(&DMatrix::zeros(n, nc), &DMatrix::identity(nc, nc))?;
    let coarse_matrix = -(&lambda + lambda.transpose()) * 0.5;

    let kd = k.to_full_storage();
    let mut kpsi = DMatrix::zeros(n, nc);
    for j in 0..nc {
        let col = kd.matvec(psi.column(j).as_slice())?;
        kpsi.set_column(j, &DVector::from_vec(col));
    }
    let energy = psi.transpose() * kpsi;
    let scale = coarse_matrix.amax().max(f64::MIN_POSITIVE);
    let gap = (&energy - &coarse_matrix).amax();
    if gap > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "coarse matrix mismatch: |ΨᵀKΨ + Λ| = {gap:e} vs |K_C| = {scale:e}"
        )));
    }
    let reproduction = (c * &psi - DMatrix::<f64>::identity(nc, nc)).amax();
    if reproduction > 1e-8 {
        return Err(Error::Numerical(format!("constraints not reproduced: |CΨ - I| = {reproduction:e}")));
    }
    Ok(CoarseBasis {
        psi,
        lambda,
        coarse_matrix,
        solver,
    })
}

#[derive(Debug, Clone)]
pub struct BddcOptions {
    pub policy: ConstraintPolicy,
    pub weights: WeightScheme,
    pub corners: CornerSelection,
    /// Ordered reductions over subdomains.
    pub deterministic: bool,
    pub factor: FactorOptions,
    /// Level-1 partitioner; `None` picks regular blocks when they fit.
    pub level1_method: Option<PartitionMethod>,
}

impl Default for BddcOptions {
    fn default() -> Self {
        BddcOptions {
            policy: ConstraintPolicy::CornersEdgesFaces,
            weights: WeightScheme::Cardinality,
            corners: CornerSelection::Heuristic,
            deterministic: true,
            factor: FactorOptions::default(),
            level1_method: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BddcSubdomain {
    pub elements: Vec<usize>,
    pub anchored: bool,
    /// Weight per local interface dof, in the split's interface order.
    pub weights: Vec<f64>,
    /// `None` on a single-subdomain level, which has nothing to correct.
    pub basis: Option<CoarseBasis>,
    psi_interface: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct BddcLevel {
    pub level: usize,
    pub mesh: LevelMesh,
    pub partition: LevelPartition,
    pub globs: GlobSet,
    pub problem: InterfaceProblem,
    pub constraints: ConstraintMatrix,
    pub subdomains: Vec<BddcSubdomain>,
}

impl BddcLevel {
    pub fn n_coarse(&self) -> usize {
        self.constraints.n_coarse
    }

    /// `r_i = E_iᵀ r̂`, subdomain corrections (interface part) and `r_C`.
    fn descend(&self, r_gamma: &[f64], deterministic: bool) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let parts = self
            .problem
            .subdomains
            .par_iter()
            .zip(&self.subdomains)
            .enumerate()
            .map(|(i, (split, sub))| {
                let Some(basis) = &sub.basis else {
                    return Ok((Vec::new(), Vec::new()));
                };
                let rb: Vec<f64> = split
                    .interface_index
                    .iter()
                    .zip(&sub.weights)
                    .map(|(&k, w)| w * r_gamma[k])
                    .collect();
                let mut r_local = vec![0.0; split.n_local()];
                for (&l, &v) in split.interface.iter().zip(&rb) {
                    r_local[l] = v;
                }
                let z = basis.correction(&r_local).map_err(|e| e.at_subdomain(self.level, i))?;
                let zb: Vec<f64> = split.interface.iter().map(|&l| z[l]).collect();
                let rc = sub.psi_interface.tr_mul(&DVector::from_vec(rb));
                Ok((zb, rc.as_slice().to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (z, rc): (Vec<Vec<f64>>, Vec<Vec<f64>>) = parts.into_iter().unzip();
        let items = self
            .constraints
            .subdomains
            .iter()
            .zip(rc)
            .map(|(c, v)| (c.coarse_map.as_slice(), v))
            .collect();
        Ok((z, scatter_add(self.n_coarse(), items, deterministic)))
    }

    /// `ẑ = Σ E_i (Ψ_i R_Ci z_C + z_i)` on the interface.
    fn ascend(&self, z_c: &[f64], z: &[Vec<f64>]) -> Vec<f64> {
        let parts = self
            .constraints
            .subdomains
            .par_iter()
            .zip(&self.subdomains)
            .zip(z)
            .map(|((c, sub), zb)| {
                if sub.basis.is_none() {
                    return Vec::new();
                }
                let uc = DVector::from_iterator(c.coarse_map.len(), c.coarse_map.iter().map(|&g| z_c[g]));
                let v = &sub.psi_interface * uc;
                v.iter().zip(zb).zip(&sub.weights).map(|((a, b), w)| w * (a + b)).collect()
            })
            .collect();
        self.problem.sum_interface(parts)
    }
}

/// Interior solves recorded by the pre-correction of one level.
#[derive(Debug, Clone)]
pub struct PreCorrection {
    pub level: usize,
    /// `K_II⁻¹ r_I` per subdomain.
    pub interior: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MultilevelBddc {
    levels: Vec<BddcLevel>,
    coarse_matrix: SparseMatrix,
    coarse_factor: Option<Factorization>,
    deterministic: bool,
}

impl MultilevelBddc {
    /// `hierarchy[ℓ - 1]` is the number of subdomains on level `ℓ`; the
    /// number of levels is `hierarchy.len() + 1`.
    pub fn setup(spec: &ProblemSpec, mesh: &Mesh, hierarchy: &[usize], opts: &BddcOptions) -> Result<Self> {
        let n1 = *hierarchy
            .first()
            .ok_or_else(|| Error::Config("at least one level of subdomains is required".into()))?;
        let lm = LevelMesh::from_mesh(mesh);
        let partition = match opts.level1_method {
            Some(m) => partition_elements(&lm, n1, m, 1),
            None => partition_auto(&lm, n1, 1),
        }
        .map_err(|e| e.at_level(1))?;
        Self::setup_with_partition(spec, mesh, partition, &hierarchy[1..], opts)
    }

    /// Same as [`MultilevelBddc::setup`] with a given level-1 partition;
    /// `higher` lists subdomain counts for levels 2 and up.
    pub fn setup_with_partition(
        spec: &ProblemSpec,
        mesh: &Mesh,
        partition: LevelPartition,
        higher: &[usize],
        opts: &BddcOptions,
    ) -> Result<Self> {
        spec.validate()?;
        mesh.validate()?;
        for (k, &n) in higher.iter().enumerate() {
            if n == 0 {
                return Err(Error::Config(format!("level {} has zero subdomains", k + 2)));
            }
        }
        let mut levels: Vec<BddcLevel> = Vec::new();
        let mut next_mesh = Some(LevelMesh::from_mesh(mesh));
        let mut partition = Some(partition);
        let mut lower_matrices: Vec<(Vec<Option<usize>>, DMatrix<f64>)> = Vec::new();
        for l in 1..=higher.len() + 1 {
            let Some(mesh_l) = next_mesh.take() else { break };
            let part = match partition.take() {
                Some(p) => p,
                None => partition_auto(&mesh_l, higher[l - 2], l).map_err(|e| e.at_level(l))?,
            };
            let level = build_level(l, spec, mesh, mesh_l, part, &lower_matrices, opts)?;
            let last = l == higher.len() + 1;
            if !last {
                let pm = build_pseudomesh(&level.globs, &level.partition, &level.mesh, opts.policy, l + 1)
                    .map_err(|e| e.at_level(l + 1))?;
                if pm.is_trivial() {
                    levels.push(level);
                    break;
                }
                let anchored = level.subdomains.iter().map(|s| s.anchored).collect();
                next_mesh = Some(LevelMesh::from_pseudomesh(
                    &pm,
                    level.mesh.dofs_per_node,
                    level.constraints.coarse_node_dofs.clone(),
                    level.constraints.n_coarse,
                    anchored,
                    &level.partition,
                ));
                lower_matrices = coarse_elements(&level);
            } else {
                lower_matrices = coarse_elements(&level);
            }
            levels.push(level);
        }

        let top = levels.last().expect("at least one level");
        let n_top = top.n_coarse();
        let top_level = levels.len() + 1;
        let (coarse_matrix, coarse_factor) = if n_top == 0 {
            (SparseMatrix::from_triplets(0, 0, &[], Symmetry::SymmetricFull)?, None)
        } else {
            let (kc, map) = assemble_elements(lower_matrices.iter().map(|(d, m)| (d.as_slice(), m)))
                .map_err(|e| e.at_level(top_level))?;
            if map.len() != n_top {
                return Err(Error::InvalidState("coarse dofs missing from the top-level matrix".into()).at_level(top_level));
            }
            let f = factorize_with(&kc, FactorKind::Spd, &opts.factor).map_err(|e| e.at_level(top_level))?;
            (kc, Some(f))
        };
        Ok(MultilevelBddc {
            levels,
            coarse_matrix,
            coarse_factor,
            deterministic: opts.deterministic,
        })
    }

    /// Number of levels including the top coarse problem.
    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn levels(&self) -> &[BddcLevel] {
        &self.levels
    }

    pub fn level(&self, level: usize) -> Result<&BddcLevel> {
        level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or_else(|| Error::InvalidState(format!("no level {level} in a {}-level hierarchy", self.n_levels())))
    }

    /// The level-1 interface problem the preconditioner acts on.
    pub fn interface_problem(&self) -> &InterfaceProblem {
        &self.levels[0].problem
    }

    /// Global coarse dimension produced by each level.
    pub fn coarse_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(BddcLevel::n_coarse).collect()
    }

    /// Assembled top-level coarse matrix.
    pub fn top_coarse_matrix(&self) -> &SparseMatrix {
        &self.coarse_matrix
    }

    /// `ẑ = M r̂` on the level-1 interface.
    pub fn apply(&self, r_hat: &[f64]) -> Result<Vec<f64>> {
        let first = &self.levels[0];
        if r_hat.len() != first.problem.n_interface() {
            return Err(Error::DimensionMismatch {
                context: "preconditioner input",
                expected: first.problem.n_interface(),
                found: r_hat.len(),
            });
        }
        let mut pre: Vec<Option<PreCorrection>> = Vec::with_capacity(self.levels.len());
        let mut corrections = Vec::with_capacity(self.levels.len());
        let mut residual = r_hat.to_vec();
        for (idx, level) in self.levels.iter().enumerate() {
            let r_gamma = if idx == 0 {
                pre.push(None);
                std::mem::take(&mut residual)
            } else {
                let (rg, pc) = self.interior_precorrection(idx + 1, &residual)?;
                pre.push(Some(pc));
                rg
            };
            let (z, rc) = level.descend(&r_gamma, self.deterministic)?;
            corrections.push(z);
            residual = rc;
        }
        let mut z = match &self.coarse_factor {
            Some(f) => f.solve(&residual).map_err(|e| e.at_level(self.n_levels()))?,
            None => Vec::new(),
        };
        for (idx, level) in self.levels.iter().enumerate().rev() {
            let z_gamma = level.ascend(&z, &corrections[idx]);
            z = match &pre[idx] {
                Some(pc) => self.interior_postcorrection(idx + 1, &z_gamma, pc)?,
                None => z_gamma,
            };
        }
        Ok(z)
    }

    /// For `level > 1`: `u_I = K_II⁻¹ r_I` per subdomain and the interface
    /// residual `r_Γ - Σ K_ΓI u_I`.
    pub fn interior_precorrection(&self, level: usize, r: &[f64]) -> Result<(Vec<f64>, PreCorrection)> {
        if level <= 1 {
            return Err(Error::InvalidState("interior corrections apply only above the first level".into()));
        }
        let problem = &self.level(level)?.problem;
        if r.len() != problem.n_dofs {
            return Err(Error::DimensionMismatch {
                context: "level residual",
                expected: problem.n_dofs,
                found: r.len(),
            });
        }
        let solved = problem
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let ri: Vec<f64> = s.interior_global().map(|g| r[g]).collect();
                let u = s.interior_solve(&ri).map_err(|e| e.at_subdomain(level, i))?;
                let kbu = if u.is_empty() {
                    vec![0.0; s.n_interface()]
                } else {
                    s.k_ib.transpose_matvec(&u)?
                };
                Ok((u, kbu))
            })
            .collect::<Result<Vec<_>>>()?;
        let (interior, kbu): (Vec<Vec<f64>>, Vec<Vec<f64>>) = solved.into_iter().unzip();
        let mut rg = problem.sum_interface(kbu);
        for (v, &g) in rg.iter_mut().zip(&problem.interface_dofs) {
            *v = r[g] - *v;
        }
        Ok((rg, PreCorrection { level, interior }))
    }

    /// For `level > 1`: full level vector with interface values `ẑ_Γ` and
    /// interior values `u_I - K_II⁻¹ K_IΓ ẑ_Γ`.
    pub fn interior_postcorrection(&self, level: usize, z_gamma: &[f64], pre: &PreCorrection) -> Result<Vec<f64>> {
        if level <= 1 {
            return Err(Error::InvalidState("interior corrections apply only above the first level".into()));
        }
        if pre.level != level {
            return Err(Error::InvalidState(format!(
                "pre-correction of level {} used on level {level}",
                pre.level
            )));
        }
        let problem = &self.level(level)?.problem;
        if z_gamma.len() != problem.n_interface() {
            return Err(Error::DimensionMismatch {
                context: "interface correction",
                expected: problem.n_interface(),
                found: z_gamma.len(),
            });
        }
        let interiors = problem
            .subdomains
            .par_iter()
            .zip(&pre.interior)
            .enumerate()
            .map(|(i, (s, u))| {
                if u.is_empty() {
                    return Ok(Vec::new());
                }
                let zb: Vec<f64> = s.interface_index.iter().map(|&k| z_gamma[k]).collect();
                let t = s.k_ib.matvec(&zb)?;
                let c = s.interior_solve(&t).map_err(|e| e.at_subdomain(level, i))?;
                Ok(u.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut z = vec![0.0; problem.n_dofs];
        for (&g, &v) in problem.interface_dofs.iter().zip(z_gamma) {
            z[g] = v;
        }
        for (s, zi) in problem.subdomains.iter().zip(interiors) {
            for (g, v) in s.interior_global().zip(zi) {
                z[g] = v;
            }
        }
        Ok(z)
    }
}

/// Pseudo-element matrices of the next level: `K_Cj` with its coarse dofs.
fn coarse_elements(level: &BddcLevel) -> Vec<(Vec<Option<usize>>, DMatrix<f64>)> {
    level
        .subdomains
        .iter()
        .zip(&level.constraints.subdomains)
        .map(|(s, c)| {
            let dofs = c.coarse_map.iter().map(|&g| Some(g)).collect();
            let m = s
                .basis
                .as_ref()
                .map_or_else(|| DMatrix::zeros(0, 0), |b| b.coarse_matrix.clone());
            (dofs, m)
        })
        .collect()
}

fn build_level(
    l: usize,
    spec: &ProblemSpec,
    mesh: &Mesh,
    mesh_l: LevelMesh,
    partition: LevelPartition,
    lower: &[(Vec<Option<usize>>, DMatrix<f64>)],
    opts: &BddcOptions,
) -> Result<BddcLevel> {
    let ctx = |e: Error| e.at_level(l);
    if partition.assignment.len() != mesh_l.element_nodes.len() {
        return Err(ctx(Error::DimensionMismatch {
            context: "partition assignment",
            expected: mesh_l.element_nodes.len(),
            found: partition.assignment.len(),
        }));
    }
    let elements = partition.subdomain_elements();
    let parts = elements
        .par_iter()
        .enumerate()
        .map(|(i, elems)| {
            if l == 1 {
                subassemble_subdomain(spec, mesh, elems)
            } else {
                assemble_elements(elems.iter().map(|&e| (lower[e].0.as_slice(), &lower[e].1)))
            }
            .map_err(|e| e.at_subdomain(l, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let maps: Vec<Vec<usize>> = parts.iter().map(|(_, m)| m.clone()).collect();
    let mut problem = InterfaceProblem::unfactored(l, mesh_l.n_dofs, parts).map_err(ctx)?;
    problem.deterministic = opts.deterministic;
    problem.factorize(&opts.factor)?;

    let mut globs = classify_interface(&mesh_l, &partition).map_err(ctx)?;
    select_corners(&mut globs, &mesh_l, opts.corners).map_err(ctx)?;

    let anchored: Vec<bool> = elements
        .iter()
        .map(|es| es.iter().any(|&e| mesh_l.anchored[e]))
        .collect();
    let constraints = build_constraints(&globs, &mesh_l, &maps, &anchored, opts.policy).map_err(ctx)?;

    let interface_globals: Vec<Vec<usize>> = problem
        .subdomains
        .iter()
        .map(|s| s.interface.iter().map(|&k| s.local_to_global[k]).collect())
        .collect();
    let diagonals: Vec<Vec<f64>> = problem.subdomains.iter().map(|s| s.k_bb.diagonal()).collect();
    let weights = build_weights(opts.weights, &interface_globals, &diagonals).map_err(ctx)?;

    let single = partition.n_subdomains == 1;
    let subdomains = problem
        .subdomains
        .par_iter()
        .zip(&constraints.subdomains)
        .zip(weights)
        .zip(elements)
        .zip(anchored)
        .enumerate()
        .map(|(i, ((((split, c), weights), elements), anchored))| {
            let (basis, psi_interface) = if single {
                (None, DMatrix::zeros(0, 0))
            } else {
                let basis = coarse_basis_with(&split.matrix, &c.to_dense(), &opts.factor).map_err(|e| match e {
                    Error::SingularMatrix { .. } | Error::NotPositiveDefinite { .. } => {
                        Error::InsufficientConstraints {
                            subdomain: i,
                            reason: format!("bordered matrix is singular ({e})"),
                        }
                    }
                    other => other,
                });
                let basis = basis.map_err(|e| e.at_subdomain(l, i))?;
                let rows: Vec<usize> = split.interface.clone();
                let pi = basis.psi.select_rows(rows.iter());
                (Some(basis), pi)
            };
            Ok(BddcSubdomain {
                elements,
                anchored,
                weights,
                basis,
                psi_interface,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BddcLevel {
        level: l,
        mesh: mesh_l,
        partition,
        globs,
        problem,
        constraints,
        subdomains,
    })
}
