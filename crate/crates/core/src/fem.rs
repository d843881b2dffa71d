//! Structured quadrilateral/hexahedral meshes, bilinear/trilinear element
//! matrices for Poisson and linear elasticity, and assembly with symmetric
//! elimination of Dirichlet dofs.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, Symmetry};

/// A face of the box `[0, L]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoxFace {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl BoxFace {
    pub fn all(dim: usize) -> Vec<BoxFace> {
        let faces = [
            BoxFace::XMin,
            BoxFace::XMax,
            BoxFace::YMin,
            BoxFace::YMax,
            BoxFace::ZMin,
            BoxFace::ZMax,
        ];
        faces[..2 * dim].to_vec()
    }

    fn axis(self) -> usize {
        match self {
            BoxFace::XMin | BoxFace::XMax => 0,
            BoxFace::YMin | BoxFace::YMax => 1,
            BoxFace::ZMin | BoxFace::ZMax => 2,
        }
    }

    fn is_max(self) -> bool {
        matches!(self, BoxFace::XMax | BoxFace::YMax | BoxFace::ZMax)
    }

    pub fn name(self) -> &'static str {
        match self {
            BoxFace::XMin => "xmin",
            BoxFace::XMax => "xmax",
            BoxFace::YMin => "ymin",
            BoxFace::YMax => "ymax",
            BoxFace::ZMin => "zmin",
            BoxFace::ZMax => "zmax",
        }
    }

    pub fn parse(s: &str) -> Option<BoxFace> {
        BoxFace::all(3).into_iter().find(|f| f.name() == s)
    }
}

/// Element/node incidence with coordinates and Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    /// Coordinates padded to three components (z = 0 in 2D).
    pub node_coords: Vec<[f64; 3]>,
    pub element_nodes: Vec<Vec<usize>>,
    pub dofs_per_node: usize,
    /// Raw dof index `node * dofs_per_node + component`, sorted, with its
    /// prescribed value.
    pub boundary_dofs: Vec<(usize, f64)>,
    /// Elements per axis when the mesh is a structured box.
    pub box_elems_per_axis: Option<usize>,
    pub length: f64,
}

pub fn generate_box_mesh(dim: usize, n_elems_per_axis: usize, length_per_axis: f64) -> Result<Mesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidMesh(format!("dimension must be 2 or 3, got {dim}")));
    }
    if n_elems_per_axis < 1 {
        return Err(Error::InvalidMesh("need at least one element per axis".into()));
    }
    if !(length_per_axis > 0.0) {
        return Err(Error::InvalidMesh("box length must be positive".into()));
    }
    let n = n_elems_per_axis;
    let np = n + 1;
    let h = length_per_axis / n as f64;
    let coord = |i: usize| if i == n { length_per_axis } else { i as f64 * h };
    let nz = if dim == 3 { np } else { 1 };
    let mut node_coords = Vec::with_capacity(np * np * nz);
    for k in 0..nz {
        for j in 0..np {
            for i in 0..np {
                node_coords.push([coord(i), coord(j), if dim == 3 { coord(k) } else { 0.0 }]);
            }
        }
    }
    let node = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut element_nodes = Vec::new();
    let ez = if dim == 3 { n } else { 1 };
    for k in 0..ez {
        for j in 0..n {
            for i in 0..n {
                let mut e = vec![node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k)];
                if dim == 3 {
                    e.extend([
                        node(i, j, k + 1),
                        node(i + 1, j, k + 1),
                        node(i + 1, j + 1, k + 1),
                        node(i, j + 1, k + 1),
                    ]);
                }
                element_nodes.push(e);
            }
        }
    }
    Ok(Mesh {
        dim,
        node_coords,
        element_nodes,
        dofs_per_node: 1,
        boundary_dofs: Vec::new(),
        box_elems_per_axis: Some(n),
        length: length_per_axis,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_nodes.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.dim == 2 {
            4
        } else {
            8
        }
    }

    /// Characteristic element size (grid spacing for box meshes).
    pub fn element_size(&self) -> f64 {
        match self.box_elems_per_axis {
            Some(n) => self.length / n as f64,
            None => {
                let e = &self.element_nodes[0];
                let (a, b) = (self.node_coords[e[0]], self.node_coords[e[1]]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let per = self.nodes_per_element();
        let n_nodes = self.n_nodes();
        for (e, nodes) in self.element_nodes.iter().enumerate() {
            if nodes.len() != per {
                return Err(Error::InvalidMesh(format!("element {e} has {} nodes, expected {per}", nodes.len())));
            }
            let mut sorted = nodes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != per {
                return Err(Error::InvalidMesh(format!("element {e} repeats a node")));
            }
            if let Some(&bad) = nodes.iter().find(|&&v| v >= n_nodes) {
                return Err(Error::InvalidMesh(format!("element {e} references node {bad}")));
            }
        }
        let n_dofs = n_nodes * self.dofs_per_node;
        for w in self.boundary_dofs.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidMesh("boundary dofs not sorted and unique".into()));
            }
        }
        if let Some(&(d, _)) = self.boundary_dofs.last() {
            if d >= n_dofs {
                return Err(Error::InvalidMesh(format!("boundary dof {d} out of range")));
            }
        }
        Ok(())
    }

    /// Nodes lying on a box face (coordinate test with a relative tolerance).
    pub fn nodes_on_face(&self, face: BoxFace) -> Vec<usize> {
        let axis = face.axis();
        let target = if face.is_max() { self.length } else { 0.0 };
        let tol = 1e-10 * self.length;
        (0..self.n_nodes())
            .filter(|&v| (self.node_coords[v][axis] - target).abs() <= tol)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Poisson,
    Elasticity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsKind {
    /// Unit body load in every component.
    Constant,
    Zero,
}

/// Physics, material, load and Dirichlet data for a box problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub diffusivity: f64,
    /// Young's modulus (Pa).
    pub young: f64,
    pub poisson_ratio: f64,
    pub rhs: RhsKind,
    /// Faces with a prescribed value applied to every component.
    pub dirichlet_faces: Vec<(BoxFace, f64)>,
}

impl ProblemSpec {
    /// Unit diffusivity, homogeneous Dirichlet data on the whole boundary.
    pub fn poisson(dim: usize) -> Self {
        ProblemSpec {
            kind: ProblemKind::Poisson,
            diffusivity: 1.0,
            young: 1.0,
            poisson_ratio: 0.3,
            rhs: RhsKind::Constant,
            dirichlet_faces: BoxFace::all(dim).into_iter().map(|f| (f, 0.0)).collect(),
        }
    }

    /// Unit Young's modulus, ν = 0.3, clamped on the `x = 0` face.
    pub fn elasticity() -> Self {
        ProblemSpec {
            kind: ProblemKind::Elasticity,
            diffusivity: 1.0,
            young: 1.0,
            poisson_ratio: 0.3,
            rhs: RhsKind::Constant,
            dirichlet_faces: vec![(BoxFace::XMin, 0.0)],
        }
    }

    pub fn dofs_per_node(&self, dim: usize) -> usize {
        match self.kind {
            ProblemKind::Poisson => 1,
            ProblemKind::Elasticity => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProblemKind::Poisson if !(self.diffusivity > 0.0) => {
                Err(Error::Config("diffusivity must be positive".into()))
            }
            ProblemKind::Elasticity if !(self.young > 0.0) => {
                Err(Error::Config("Young's modulus must be positive".into()))
            }
            ProblemKind::Elasticity if !(0.0..0.5).contains(&self.poisson_ratio) => {
                Err(Error::Config("Poisson ratio must lie in [0, 0.5)".into()))
            }
            _ => Ok(()),
        }
    }

    /// Sets `dofs_per_node` and the Dirichlet dofs of `mesh` from this spec.
    pub fn apply_boundary_conditions(&self, mesh: &mut Mesh) -> Result<()> {
        self.validate()?;
        let dpn = self.dofs_per_node(mesh.dim);
        mesh.dofs_per_node = dpn;
        let mut prescribed = std::collections::BTreeMap::new();
        for &(face, value) in &self.dirichlet_faces {
            if face.axis() >= mesh.dim {
                return Err(Error::Config(format!("face {} does not exist in {}D", face.name(), mesh.dim)));
            }
            for v in mesh.nodes_on_face(face) {
                for c in 0..dpn {
                    prescribed.insert(v * dpn + c, value);
                }
            }
        }
        mesh.boundary_dofs = prescribed.into_iter().collect();
        Ok(())
    }

    /// Generates a box mesh with this spec's boundary conditions applied.
    pub fn build_mesh(&self, dim: usize, n_elems_per_axis: usize, length: f64) -> Result<Mesh> {
        let mut mesh = generate_box_mesh(dim, n_elems_per_axis, length)?;
        self.apply_boundary_conditions(&mut mesh)?;
        Ok(mesh)
    }
}

/// Numbering of free dofs in (node, component) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// Per node, per component: free dof index, or `None` if prescribed.
    pub node_dofs: Vec<Vec<Option<usize>>>,
    pub n_free: usize,
    prescribed: Vec<Option<f64>>,
    dofs_per_node: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let dpn = mesh.dofs_per_node;
        let n_raw = mesh.n_nodes() * dpn;
        let mut prescribed = vec![None; n_raw];
        for &(d, v) in &mesh.boundary_dofs {
            prescribed[d] = Some(v);
        }
        let mut next = 0;
        let node_dofs = (0..mesh.n_nodes())
            .map(|v| {
                (0..dpn)
                    .map(|c| {
                        if prescribed[v * dpn + c].is_some() {
                            None
                        } else {
                            next += 1;
                            Some(next - 1)
                        }
                    })
                    .collect()
            })
            .collect();
        DofMap {
            node_dofs,
            n_free: next,
            prescribed,
            dofs_per_node: dpn,
        }
    }

    /// Free dof (or `None`) for each row of an element matrix.
    pub fn element_dofs(&self, nodes: &[usize]) -> Vec<Option<usize>> {
        nodes.iter().flat_map(|&v| self.node_dofs[v].iter().copied()).collect()
    }

    fn prescribed_value(&self, node: usize, component: usize) -> f64 {
        self.prescribed[node * self.dofs_per_node + component].unwrap_or(0.0)
    }

    /// Full nodal vector (node-major) from free values plus Dirichlet data.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_dofs.len() * self.dofs_per_node);
        for (v, dofs) in self.node_dofs.iter().enumerate() {
            for (c, d) in dofs.iter().enumerate() {
                out.push(match d {
                    Some(d) => free[*d],
                    None => self.prescribed_value(v, c),
                });
            }
        }
        out
    }
}

const GAUSS: f64 = 0.577_350_269_189_625_8;

fn reference_nodes(dim: usize) -> &'static [[f64; 3]] {
    const Q4: [[f64; 3]; 4] = [[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]];
    const H8: [[f64; 3]; 8] = [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ];
    if dim == 2 {
        &Q4
    } else {
        &H8
    }
}

/// Shape values and reference gradients at `xi`.
fn shape(dim: usize, xi: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let refs = reference_nodes(dim);
    let mut n = Vec::with_capacity(refs.len());
    let mut dn = Vec::with_capacity(refs.len());
    for r in refs {
        let f: Vec<f64> = (0..dim).map(|k| 0.5 * (1.0 + r[k] * xi[k])).collect();
        let prod: f64 = f.iter().product();
        let mut g = [0.0; 3];
        for k in 0..dim {
            let others: f64 = (0..dim).filter(|&m| m != k).map(|m| f[m]).product();
            g[k] = 0.5 * r[k] * others;
        }
        n.push(prod);
        dn.push(g);
    }
    (n, dn)
}

fn gauss_points(dim: usize) -> Vec<[f64; 3]> {
    let p = [-GAUSS, GAUSS];
    let mut pts = Vec::new();
    if dim == 2 {
        for &y in &p {
            for &x in &p {
                pts.push([x, y, 0.0]);
            }
        }
    } else {
        for &z in &p {
            for &y in &p {
                for &x in &p {
                    pts.push([x, y, z]);
                }
            }
        }
    }
    pts
}

/// Physical gradients and |J|·w at every Gauss point of element `elem`.
fn element_geometry(mesh: &Mesh, elem: usize) -> Result<Vec<(Vec<f64>, Vec<[f64; 3]>, f64)>> {
    let dim = mesh.dim;
    let nodes = &mesh.element_nodes[elem];
    let scale = mesh.element_size().powi(dim as i32);
    let mut out = Vec::new();
    for xi in gauss_points(dim) {
        let (n, dn) = shape(dim, xi);
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for (a, &v) in nodes.iter().enumerate() {
            for i in 0..dim {
                for j in 0..dim {
                    jac[(i, j)] += dn[a][i] * mesh.node_coords[v][j];
                }
            }
        }
        let det = jac.determinant();
        if !(det > 1e-12 * scale) {
            return Err(Error::DegenerateElement { element: elem, det });
        }
        let inv = jac.try_inverse().ok_or(Error::DegenerateElement { element: elem, det })?;
        let grads = dn
            .iter()
            .map(|g| {
                let mut out = [0.0; 3];
                for i in 0..dim {
                    out[i] = (0..dim).map(|k| inv[(i, k)] * g[k]).sum();
                }
                out
            })
            .collect();
        out.push((n, grads, det));
    }
    Ok(out)
}

fn elasticity_d(dim: usize, young: f64, nu: f64) -> DMatrix<f64> {
    let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = young / (2.0 * (1.0 + nu));
    let ns = if dim == 2 { 3 } else { 6 };
    let mut d = DMatrix::zeros(ns, ns);
    for i in 0..dim {
        for j in 0..dim {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
    }
    for k in dim..ns {
        d[(k, k)] = mu;
    }
    d
}

/// Strain-displacement matrix; engineering shear strains ordered xy, yz, zx.
fn strain_matrix(dim: usize, grads: &[[f64; 3]]) -> DMatrix<f64> {
    let nen = grads.len();
    let ns = if dim == 2 { 3 } else { 6 };
    let mut b = DMatrix::zeros(ns, nen * dim);
    for (a, g) in grads.iter().enumerate() {
        let c = a * dim;
        for i in 0..dim {
            b[(i, c + i)] = g[i];
        }
        if dim == 2 {
            b[(2, c)] = g[1];
            b[(2, c + 1)] = g[0];
        } else {
            b[(3, c)] = g[1];
            b[(3, c + 1)] = g[0];
            b[(4, c + 1)] = g[2];
            b[(4, c + 2)] = g[1];
            b[(5, c)] = g[2];
            b[(5, c + 2)] = g[0];
        }
    }
    b
}

/// Element stiffness matrix, rows ordered (element node, component).
pub fn element_matrix(spec: &ProblemSpec, mesh: &Mesh, elem: usize) -> Result<DMatrix<f64>> {
    if elem >= mesh.n_elements() {
        return Err(Error::InvalidMesh(format!("element {elem} out of range")));
    }
    let dim = mesh.dim;
    let nen = mesh.element_nodes[elem].len();
    let geometry = element_geometry(mesh, elem)?;
    let mut k = match spec.kind {
        ProblemKind::Poisson => {
            let mut k = DMatrix::zeros(nen, nen);
            for (_, grads, w) in &geometry {
                for a in 0..nen {
                    for b in 0..nen {
                        let g: f64 = (0..dim).map(|i| grads[a][i] * grads[b][i]).sum();
                        k[(a, b)] += spec.diffusivity * g * w;
                    }
                }
            }
            k
        }
        ProblemKind::Elasticity => {
            let d = elasticity_d(dim, spec.young, spec.poisson_ratio);
            let mut k = DMatrix::zeros(nen * dim, nen * dim);
            for (_, grads, w) in &geometry {
                let b = strain_matrix(dim, grads);
                k += b.transpose() * &d * &b * *w;
            }
            k
        }
    };
    // Exact symmetry keeps assembled matrices bitwise symmetric.
    let kt = k.transpose();
    k = (&k + kt) * 0.5;
    Ok(k)
}

/// Consistent element load for the problem's right-hand side.
pub fn element_load(spec: &ProblemSpec, mesh: &Mesh, elem: usize) -> Result<Vec<f64>> {
    let dpn = spec.dofs_per_node(mesh.dim);
    let nen = mesh.element_nodes[elem].len();
    let mut f = vec![0.0; nen * dpn];
    if spec.rhs == RhsKind::Zero {
        return Ok(f);
    }
    for (n, _, w) in element_geometry(mesh, elem)? {
        for a in 0..nen {
            for c in 0..dpn {
                f[a * dpn + c] += n[a] * w;
            }
        }
    }
    Ok(f)
}

fn check_problem(spec: &ProblemSpec, mesh: &Mesh) -> Result<()> {
    spec.validate()?;
    mesh.validate()?;
    if mesh.dofs_per_node != spec.dofs_per_node(mesh.dim) {
        return Err(Error::InvalidMesh(format!(
            "mesh carries {} dofs per node but the problem needs {}",
            mesh.dofs_per_node,
            spec.dofs_per_node(mesh.dim)
        )));
    }
    if mesh.boundary_dofs.is_empty() {
        return Err(Error::NoDirichlet);
    }
    Ok(())
}

/// Assembles element matrices over `elements`. Rows/columns with `None`
/// dofs are dropped; the local numbering follows sorted global dof ids.
pub(crate) fn assemble_elements<'a, I>(parts: I) -> Result<(SparseMatrix, Vec<usize>)>
where
    I: IntoIterator<Item = (&'a [Option<usize>], &'a DMatrix<f64>)>,
{
    let parts: Vec<_> = parts.into_iter().collect();
    let mut local_to_global: Vec<usize> = parts
        .iter()
        .flat_map(|(dofs, _)| dofs.iter().flatten().copied())
        .collect();
    local_to_global.sort_unstable();
    local_to_global.dedup();
    let local = |g: usize| local_to_global.binary_search(&g).expect("dof collected above");
    let mut triplets = Vec::new();
    for (dofs, ke) in &parts {
        for (a, da) in dofs.iter().enumerate() {
            let Some(ga) = da else { continue };
            let la = local(*ga);
            for (b, db) in dofs.iter().enumerate() {
                let Some(gb) = db else { continue };
                triplets.push((la, local(*gb), ke[(a, b)]));
            }
        }
    }
    let n = local_to_global.len();
    let k = SparseMatrix::from_triplets(n, n, &triplets, Symmetry::SymmetricFull)?;
    Ok((k, local_to_global))
}

/// Right-hand side over free dofs: element loads minus the Dirichlet lift.
pub fn assemble_rhs(spec: &ProblemSpec, mesh: &Mesh) -> Result<Vec<f64>> {
    check_problem(spec, mesh)?;
    let dofs = DofMap::new(mesh);
    let dpn = mesh.dofs_per_node;
    let mut f = vec![0.0; dofs.n_free];
    for e in 0..mesh.n_elements() {
        let nodes = &mesh.element_nodes[e];
        let edofs = dofs.element_dofs(nodes);
        let fe = element_load(spec, mesh, e)?;
        let has_prescribed_nonzero = edofs
            .iter()
            .enumerate()
            .any(|(b, d)| d.is_none() && dofs.prescribed_value(nodes[b / dpn], b % dpn) != 0.0);
        let ke = if has_prescribed_nonzero {
            Some(element_matrix(spec, mesh, e)?)
        } else {
            None
        };
        for (a, da) in edofs.iter().enumerate() {
            let Some(ga) = da else { continue };
            f[*ga] += fe[a];
            if let Some(ke) = &ke {
                for (b, db) in edofs.iter().enumerate() {
                    if db.is_none() {
                        f[*ga] -= ke[(a, b)] * dofs.prescribed_value(nodes[b / dpn], b % dpn);
                    }
                }
            }
        }
    }
    Ok(f)
}

/// Global stiffness over free dofs and the matching right-hand side.
pub fn assemble_global(spec: &ProblemSpec, mesh: &Mesh) -> Result<(SparseMatrix, Vec<f64>)> {
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    let (k, map) = subassemble_subdomain(spec, mesh, &all)?;
    let n_free = DofMap::new(mesh).n_free;
    if map.len() != n_free {
        // Free dofs untouched by any element cannot occur on a valid mesh.
        return Err(Error::InvalidMesh("mesh has free dofs outside every element".into()));
    }
    let f = assemble_rhs(spec, mesh)?;
    Ok((k, f))
}

/// Sub-assembled matrix of `elements` and its local-to-global free dof map.
pub fn subassemble_subdomain(spec: &ProblemSpec, mesh: &Mesh, elements: &[usize]) -> Result<(SparseMatrix, Vec<usize>)> {
    if elements.is_empty() {
        return Err(Error::EmptyInput("subdomain element subset"));
    }
    check_problem(spec, mesh)?;
    let dofs = DofMap::new(mesh);
    let mats = elements
        .iter()
        .map(|&e| element_matrix(spec, mesh, e))
        .collect::<Result<Vec<_>>>()?;
    let edofs: Vec<Vec<Option<usize>>> = elements
        .iter()
        .map(|&e| dofs.element_dofs(&mesh.element_nodes[e]))
        .collect();
    assemble_elements(edofs.iter().map(|d| d.as_slice()).zip(mats.iter()))
}

/// Legacy-VTK ASCII unstructured grid with optional nodal field (full
/// node-major vector, see [`DofMap::expand`]) and per-element integer data.
pub fn write_vtk<W: Write>(
    mesh: &Mesh,
    nodal: Option<(&str, &[f64])>,
    cell_data: Option<(&str, &[usize])>,
    mut w: W,
) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "mlbddc mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for p in &mesh.node_coords {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let per = mesh.nodes_per_element();
    writeln!(w, "CELLS {} {}", mesh.n_elements(), mesh.n_elements() * (per + 1))?;
    for e in &mesh.element_nodes {
        let ids: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{} {}", per, ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_elements())?;
    let cell_type = if mesh.dim == 2 { 9 } else { 12 };
    for _ in 0..mesh.n_elements() {
        writeln!(w, "{cell_type}")?;
    }
    if let Some((name, values)) = cell_data {
        writeln!(w, "CELL_DATA {}", mesh.n_elements())?;
        writeln!(w, "SCALARS {name} int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v}")?;
        }
    }
    if let Some((name, values)) = nodal {
        let dpn = values.len() / mesh.n_nodes().max(1);
        writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
        if dpn == 1 {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v}")?;
            }
        } else {
            writeln!(w, "VECTORS {name} double")?;
            for chunk in values.chunks(dpn) {
                let z = if dpn == 3 { chunk[2] } else { 0.0 };
                writeln!(w, "{} {} {}", chunk[0], chunk[1], z)?;
            }
        }
    }
    Ok(())
}
