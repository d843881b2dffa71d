//! Interface analysis: globs (faces, edges, vertices), corner selection,
//! interface weights and the coarse nodes built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::partition::{LevelMesh, LevelPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GlobKind {
    Face,
    Edge,
    Vertex,
}

impl GlobKind {
    pub fn name(self) -> &'static str {
        match self {
            GlobKind::Face => "face",
            GlobKind::Edge => "edge",
            GlobKind::Vertex => "vertex",
        }
    }
}

/// Interface nodes sharing exactly the same set of subdomains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glob {
    pub kind: GlobKind,
    /// Sorted node ids.
    pub nodes: Vec<usize>,
    /// Sorted subdomain ids.
    pub subdomains: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobSet {
    pub level: usize,
    pub dim: usize,
    pub n_subdomains: usize,
    /// Sharing set of every interface node; empty for other nodes.
    pub node_subdomains: Vec<Vec<usize>>,
    /// Ordered by smallest member node.
    pub globs: Vec<Glob>,
    /// Sorted corner node ids; filled by [`select_corners`].
    pub corners: Vec<usize>,
}

impl GlobSet {
    pub fn is_interface_node(&self, node: usize) -> bool {
        !self.node_subdomains[node].is_empty()
    }

    pub fn interface_nodes(&self) -> Vec<usize> {
        (0..self.node_subdomains.len())
            .filter(|&v| self.is_interface_node(v))
            .collect()
    }

    /// `(faces, edges, vertices)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |k| self.globs.iter().filter(|g| g.kind == k).count();
        (count(GlobKind::Face), count(GlobKind::Edge), count(GlobKind::Vertex))
    }

    /// Plain-text table of globs and corners.
    pub fn report(&self) -> String {
        let (f, e, v) = self.counts();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "level {}: {} subdomains, {} interface nodes, {} faces, {} edges, {} vertices, {} corners",
            self.level,
            self.n_subdomains,
            self.interface_nodes().len(),
            f,
            e,
            v,
            self.corners.len()
        );
        let _ = writeln!(s, "{:>5}  {:<6}  {:>5}  {:>7}  subdomains", "glob", "kind", "nodes", "corners");
        for (i, g) in self.globs.iter().enumerate() {
            let corners = g.nodes.iter().filter(|n| self.corners.binary_search(n).is_ok()).count();
            let subs: Vec<String> = g.subdomains.iter().map(usize::to_string).collect();
            let _ = writeln!(
                s,
                "{:>5}  {:<6}  {:>5}  {:>7}  {}",
                i,
                g.kind.name(),
                g.nodes.len(),
                corners,
                subs.join(",")
            );
        }
        s
    }
}

/// Groups interface nodes by sharing set. Nodes without any free dof never
/// count as interface.
pub fn classify_interface(mesh: &LevelMesh, partition: &LevelPartition) -> Result<GlobSet> {
    if partition.assignment.len() != mesh.element_nodes.len() {
        return Err(Error::DimensionMismatch {
            context: "partition assignment",
            expected: mesh.element_nodes.len(),
            found: partition.assignment.len(),
        });
    }
    let n_nodes = mesh.node_coords.len();
    let mut sharing: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_nodes];
    for (e, nodes) in mesh.element_nodes.iter().enumerate() {
        for &v in nodes {
            sharing[v].insert(partition.assignment[e]);
        }
    }
    let mut node_subdomains = vec![Vec::new(); n_nodes];
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for v in 0..n_nodes {
        if sharing[v].len() >= 2 && mesh.node_has_free_dof(v) {
            let set: Vec<usize> = sharing[v].iter().copied().collect();
            node_subdomains[v] = set.clone();
            groups.entry(set).or_default().push(v);
        }
    }
    let mut globs: Vec<Glob> = groups
        .into_iter()
        .map(|(subdomains, nodes)| {
            let kind = if subdomains.len() == 2 && nodes.len() >= mesh.dim {
                GlobKind::Face
            } else if nodes.len() == 1 && subdomains.len() >= 3 {
                GlobKind::Vertex
            } else {
                GlobKind::Edge
            };
            Glob {
                kind,
                nodes,
                subdomains,
            }
        })
        .collect();
    globs.sort_by_key(|g| g.nodes[0]);
    Ok(GlobSet {
        level: partition.level,
        dim: mesh.dim,
        n_subdomains: partition.n_subdomains,
        node_subdomains,
        globs,
        corners: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerSelection {
    /// Vertices plus extremal face nodes, topped up where a subdomain
    /// pair would otherwise be too weakly coupled.
    #[default]
    Heuristic,
    /// Every interface node becomes a corner.
    AllInterface,
}

fn longest_axis(nodes: &[usize], coords: &[[f64; 3]], dim: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for axis in 0..dim {
        let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(coords[v][axis]), hi.max(coords[v][axis]))
        });
        if hi - lo > best.1 {
            best = (axis, hi - lo);
        }
    }
    best.0
}

fn dist_to_line(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let c = [
        d[1] * w[2] - d[2] * w[1],
        d[2] * w[0] - d[0] * w[2],
        d[0] * w[1] - d[1] * w[0],
    ];
    let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if dn == 0.0 {
        return (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    }
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() / dn
}

/// Extremal nodes of a set: both ends along the longest axis, plus in 3D
/// the node farthest from the line through them.
fn extremal_nodes(nodes: &[usize], coords: &[[f64; 3]], dim: usize) -> Vec<usize> {
    let axis = longest_axis(nodes, coords, dim);
    let key = |v: &usize| coords[*v][axis];
    let lo = *nodes
        .iter()
        .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)))
        .unwrap();
    let hi = *nodes
        .iter()
        .max_by(|a, b| key(a).total_cmp(&key(b)).then(b.cmp(a)))
        .unwrap();
    let mut out = vec![lo];
    if hi != lo {
        out.push(hi);
    }
    if dim == 3 && out.len() == 2 {
        let (a, b) = (coords[lo], coords[hi]);
        let scale = dist_to_line(b, a, a).max(f64::MIN_POSITIVE);
        let far = nodes
            .iter()
            .map(|&v| (v, dist_to_line(coords[v], a, b)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        if let Some((v, d)) = far {
            if d > 1e-8 * scale {
                out.push(v);
            }
        }
    }
    out
}

/// Whether the given corners pin down rigid motions of two subdomains
/// relative to each other: two distinct points in 2D, three non-collinear
/// points in 3D.
fn corners_sufficient(corners: &[usize], coords: &[[f64; 3]], dim: usize) -> bool {
    if corners.len() < dim {
        return false;
    }
    if dim == 2 {
        return true;
    }
    let a = coords[corners[0]];
    let b = corners
        .iter()
        .map(|&v| coords[v])
        .max_by(|x, y| dist_to_line(*x, a, a).total_cmp(&dist_to_line(*y, a, a)))
        .unwrap();
    let scale = dist_to_line(b, a, a);
    if scale == 0.0 {
        return false;
    }
    corners
        .iter()
        .any(|&v| dist_to_line(coords[v], a, b) > 1e-8 * scale)
}

/// Fills `globs.corners`.
pub fn select_corners(globs: &mut GlobSet, mesh: &LevelMesh, mode: CornerSelection) -> Result<()> {
    let coords = &mesh.node_coords;
    let dim = mesh.dim;
    let mut corners: BTreeSet<usize> = BTreeSet::new();
    if mode == CornerSelection::AllInterface {
        corners.extend(globs.interface_nodes());
        globs.corners = corners.into_iter().collect();
        return Ok(());
    }
    for g in &globs.globs {
        match g.kind {
            GlobKind::Vertex => corners.extend(g.nodes.iter().copied()),
            GlobKind::Face => corners.extend(extremal_nodes(&g.nodes, coords, dim)),
            GlobKind::Edge => {}
        }
    }

    for face in globs.globs.iter().filter(|g| g.kind == GlobKind::Face) {
        let (a, b) = (face.subdomains[0], face.subdomains[1]);
        let candidates: Vec<usize> = globs
            .globs
            .iter()
            .filter(|g| g.subdomains.contains(&a) && g.subdomains.contains(&b))
            .flat_map(|g| g.nodes.iter().copied())
            .collect();
        let present = |corners: &BTreeSet<usize>| -> Vec<usize> {
            candidates.iter().copied().filter(|v| corners.contains(v)).collect()
        };
        if corners_sufficient(&present(&corners), coords, dim) {
            continue;
        }
        let mut sorted = candidates.clone();
        sorted.sort_unstable();
        corners.extend(extremal_nodes(&sorted, coords, dim));
        if !corners_sufficient(&present(&corners), coords, dim) && mesh.dofs_per_node > 1 {
            return Err(Error::InsufficientCorners { first: a, second: b });
        }
    }
    globs.corners = corners.into_iter().collect();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// `1 / (number of subdomains sharing the dof)`.
    #[default]
    Cardinality,
    /// Own diagonal stiffness over the sum across sharing subdomains.
    StiffnessDiagonal,
}

/// Interface weights per subdomain. `interface_dofs[i]` lists the global
/// interface dofs of subdomain `i`; `diagonals[i]` the matching diagonal
/// entries of its local matrix (ignored for cardinality weights).
pub fn build_weights(
    scheme: WeightScheme,
    interface_dofs: &[Vec<usize>],
    diagonals: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, dofs) in interface_dofs.iter().enumerate() {
        if scheme == WeightScheme::StiffnessDiagonal && diagonals.get(i).map(Vec::len) != Some(dofs.len()) {
            return Err(Error::DimensionMismatch {
                context: "interface diagonal",
                expected: dofs.len(),
                found: diagonals.get(i).map_or(0, Vec::len),
            });
        }
        for (k, &g) in dofs.iter().enumerate() {
            *count.entry(g).or_default() += 1;
            if scheme == WeightScheme::StiffnessDiagonal {
                let d = diagonals[i][k];
                if !(d > 0.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "nonpositive diagonal {d} at interface dof {g} of subdomain {i}"
                    )));
                }
                *total.entry(g).or_default() += d;
            }
        }
    }
    Ok(interface_dofs
        .iter()
        .enumerate()
        .map(|(i, dofs)| {
            dofs.iter()
                .enumerate()
                .map(|(k, g)| match scheme {
                    WeightScheme::Cardinality => 1.0 / count[g] as f64,
                    WeightScheme::StiffnessDiagonal => diagonals[i][k] / total[g],
                })
                .collect()
        })
        .collect())
}

/// Which globs contribute averaged coarse dofs besides corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintPolicy {
    CornersOnly,
    /// In 2D the interface between two subdomains is a curve, so face
    /// globs count as edges here.
    CornersEdges,
    #[default]
    CornersEdgesFaces,
}

impl ConstraintPolicy {
    pub fn includes(self, kind: GlobKind, dim: usize) -> bool {
        match (self, kind) {
            (_, GlobKind::Vertex) => false,
            (ConstraintPolicy::CornersOnly, _) => false,
            (ConstraintPolicy::CornersEdges, GlobKind::Edge) => true,
            (ConstraintPolicy::CornersEdges, GlobKind::Face) => dim == 2,
            (ConstraintPolicy::CornersEdgesFaces, _) => true,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "corners" | "corners-only" => Some(ConstraintPolicy::CornersOnly),
            "corners+edges" | "corners-edges" => Some(ConstraintPolicy::CornersEdges),
            "corners+edges+faces" | "corners-edges-faces" => Some(ConstraintPolicy::CornersEdgesFaces),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintPolicy::CornersOnly => "corners",
            ConstraintPolicy::CornersEdges => "corners+edges",
            ConstraintPolicy::CornersEdgesFaces => "corners+edges+faces",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseNodeKind {
    Corner,
    EdgeAverage,
    FaceAverage,
}

/// One node of the next level: a corner, or the non-corner part of a glob.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseNode {
    pub kind: CoarseNodeKind,
    /// Mesh nodes the coarse dofs evaluate or average.
    pub constituents: Vec<usize>,
    pub subdomains: Vec<usize>,
    pub glob: Option<usize>,
}

impl CoarseNode {
    pub fn centroid(&self, mesh: &LevelMesh) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &v in &self.constituents {
            for (ci, x) in c.iter_mut().zip(mesh.node_coords[v]) {
                *ci += x;
            }
        }
        let m = self.constituents.len() as f64;
        c.map(|x| x / m)
    }

    /// Per component: the free level dofs it acts on.
    pub fn component_dofs(&self, mesh: &LevelMesh) -> Vec<Vec<usize>> {
        (0..mesh.dofs_per_node)
            .map(|c| {
                self.constituents
                    .iter()
                    .filter_map(|&v| mesh.node_dofs[v][c])
                    .collect()
            })
            .collect()
    }
}

/// Corners in node order, then glob remainders in glob order; globs
/// excluded by the policy or fully covered by corners contribute nothing.
pub fn coarse_nodes(globs: &GlobSet, mesh: &LevelMesh, policy: ConstraintPolicy) -> Vec<CoarseNode> {
    let mut out: Vec<CoarseNode> = globs
        .corners
        .iter()
        .map(|&v| CoarseNode {
            kind: CoarseNodeKind::Corner,
            constituents: vec![v],
            subdomains: globs.node_subdomains[v].clone(),
            glob: None,
        })
        .collect();
    for (gi, g) in globs.globs.iter().enumerate() {
        if !policy.includes(g.kind, globs.dim) {
            continue;
        }
        let rest: Vec<usize> = g
            .nodes
            .iter()
            .copied()
            .filter(|v| globs.corners.binary_search(v).is_err())
            .collect();
        if rest.is_empty() || !rest.iter().any(|&v| mesh.node_has_free_dof(v)) {
            continue;
        }
        let kind = if g.kind == GlobKind::Face && globs.dim == 3 {
            CoarseNodeKind::FaceAverage
        } else {
            CoarseNodeKind::EdgeAverage
        };
        out.push(CoarseNode {
            kind,
            constituents: rest,
            subdomains: g.subdomains.clone(),
            glob: Some(gi),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::ProblemSpec;
    use crate::partition::{partition_elements, PartitionMethod};

    fn setup(spec: &ProblemSpec, dim: usize, n: usize, parts: usize) -> (LevelMesh, LevelPartition) {
        let mesh = spec.build_mesh(dim, n, 1.0).unwrap();
        let lm = LevelMesh::from_mesh(&mesh);
        let p = partition_elements(&lm, parts, PartitionMethod::RegularBlocks, 1).unwrap();
        (lm, p)
    }

    #[test]
    fn two_subdomains_share_one_face() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 4, 2);
        let g = classify_interface(&lm, &p).unwrap();
        assert_eq!(g.counts(), (1, 0, 0));
        assert_eq!(g.globs[0].subdomains, vec![0, 1]);
        // x = 0.5 line without its two Dirichlet end points.
        assert_eq!(g.globs[0].nodes.len(), 3);
    }

    #[test]
    fn two_by_two_faces_and_vertex() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 8, 4);
        let g = classify_interface(&lm, &p).unwrap();
        assert_eq!(g.counts(), (4, 0, 1));
        let v = g.globs.iter().find(|g| g.kind == GlobKind::Vertex).unwrap();
        assert_eq!(v.subdomains, vec![0, 1, 2, 3]);
        assert_eq!(lm.node_coords[v.nodes[0]], [0.5, 0.5, 0.0]);
    }

    #[test]
    fn two_by_two_coarse_arms_are_edges() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 4, 4);
        let g = classify_interface(&lm, &p).unwrap();
        assert_eq!(g.counts(), (0, 4, 1));
    }

    #[test]
    fn cube_of_eight_subdomains() {
        let (lm, p) = setup(&ProblemSpec::poisson(3), 3, 6, 8);
        let g = classify_interface(&lm, &p).unwrap();
        assert_eq!(g.counts(), (12, 6, 1));
        for glob in &g.globs {
            match glob.kind {
                GlobKind::Face => assert_eq!(glob.subdomains.len(), 2),
                GlobKind::Edge => assert_eq!(glob.subdomains.len(), 4),
                GlobKind::Vertex => assert_eq!(glob.subdomains.len(), 8),
            }
        }
    }

    #[test]
    fn globs_partition_interface_nodes() {
        for (dim, n, parts) in [(2, 6, 4), (3, 4, 8), (2, 8, 2)] {
            let (lm, p) = setup(&ProblemSpec::poisson(dim), dim, n, parts);
            let g = classify_interface(&lm, &p).unwrap();
            let mut all: Vec<usize> = g.globs.iter().flat_map(|g| g.nodes.iter().copied()).collect();
            all.sort_unstable();
            assert_eq!(all, g.interface_nodes());
            let set: BTreeSet<usize> = all.iter().copied().collect();
            assert_eq!(set.len(), all.len());
        }
    }

    #[test]
    fn dirichlet_nodes_are_not_interface() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 4, 2);
        let g = classify_interface(&lm, &p).unwrap();
        for v in g.interface_nodes() {
            assert!(lm.node_has_free_dof(v));
        }
    }

    #[test]
    fn corners_lie_on_interface_and_include_vertices() {
        let (lm, p) = setup(&ProblemSpec::poisson(3), 3, 6, 8);
        let mut g = classify_interface(&lm, &p).unwrap();
        select_corners(&mut g, &lm, CornerSelection::Heuristic).unwrap();
        for &c in &g.corners {
            assert!(g.is_interface_node(c));
        }
        for glob in g.globs.iter().filter(|g| g.kind == GlobKind::Vertex) {
            assert!(g.corners.contains(&glob.nodes[0]));
        }
        // Three non-collinear corners on every face.
        for face in g.globs.iter().filter(|g| g.kind == GlobKind::Face) {
            let on: Vec<usize> = face.nodes.iter().copied().filter(|v| g.corners.contains(v)).collect();
            assert!(corners_sufficient(&on, &lm.node_coords, 3));
        }
    }

    #[test]
    fn elasticity_pairs_get_enough_corners() {
        let spec = ProblemSpec::elasticity();
        for (dim, n, parts) in [(2, 4, 2), (2, 8, 4), (3, 4, 2), (3, 6, 8)] {
            let (lm, p) = setup(&spec, dim, n, parts);
            let mut g = classify_interface(&lm, &p).unwrap();
            select_corners(&mut g, &lm, CornerSelection::Heuristic).unwrap();
            assert!(!g.corners.is_empty());
        }
    }

    #[test]
    fn all_interface_corners() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 4, 4);
        let mut g = classify_interface(&lm, &p).unwrap();
        select_corners(&mut g, &lm, CornerSelection::AllInterface).unwrap();
        assert_eq!(g.corners, g.interface_nodes());
        assert!(coarse_nodes(&g, &lm, ConstraintPolicy::CornersEdgesFaces)
            .iter()
            .all(|n| n.kind == CoarseNodeKind::Corner));
    }

    #[test]
    fn cardinality_weights_sum_to_one() {
        let dofs = vec![vec![3, 5, 7], vec![5, 7], vec![7, 9], vec![3, 9]];
        let w = build_weights(WeightScheme::Cardinality, &dofs, &[]).unwrap();
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for (d, wi) in dofs.iter().zip(&w) {
            for (g, x) in d.iter().zip(wi) {
                *sums.entry(*g).or_default() += x;
            }
        }
        for s in sums.values() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert_eq!(w[0][2], 1.0 / 3.0);
    }

    #[test]
    fn stiffness_weights() {
        let dofs = vec![vec![0], vec![0]];
        let w = build_weights(WeightScheme::StiffnessDiagonal, &dofs, &[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(w, vec![vec![0.25], vec![0.75]]);
        assert!(build_weights(WeightScheme::StiffnessDiagonal, &dofs, &[vec![0.0], vec![3.0]]).is_err());
    }

    #[test]
    fn policy_selects_globs() {
        let (lm, p) = setup(&ProblemSpec::poisson(3), 3, 6, 8);
        let mut g = classify_interface(&lm, &p).unwrap();
        select_corners(&mut g, &lm, CornerSelection::Heuristic).unwrap();
        let c = coarse_nodes(&g, &lm, ConstraintPolicy::CornersOnly);
        assert_eq!(c.len(), g.corners.len());
        let ce = coarse_nodes(&g, &lm, ConstraintPolicy::CornersEdges);
        assert_eq!(ce.len(), g.corners.len() + 6);
        let cef = coarse_nodes(&g, &lm, ConstraintPolicy::CornersEdgesFaces);
        assert_eq!(cef.len(), g.corners.len() + 18);
        for node in &cef {
            for v in &node.constituents {
                assert_eq!(&g.node_subdomains[*v], &node.subdomains);
            }
        }
    }

    #[test]
    fn report_lists_every_glob() {
        let (lm, p) = setup(&ProblemSpec::poisson(2), 2, 8, 4);
        let mut g = classify_interface(&lm, &p).unwrap();
        select_corners(&mut g, &lm, CornerSelection::Heuristic).unwrap();
        let r = g.report();
        assert_eq!(r.lines().count(), 2 + g.globs.len());
        assert!(r.contains("4 faces, 0 edges, 1 vertices"));
    }
}
