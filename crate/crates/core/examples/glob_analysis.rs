//! Faces, edges and vertices of a 3D partition and the coarse nodes they
//! produce under each constraint policy.

use mlbddc::fem::ProblemSpec;
use mlbddc::interface::{classify_interface, coarse_nodes, select_corners, ConstraintPolicy, CornerSelection};
use mlbddc::partition::{partition_auto, LevelMesh};

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::poisson(3);
    let mesh = LevelMesh::from_mesh(&spec.build_mesh(3, 6, 1.0)?);
    let partition = partition_auto(&mesh, 8, 1)?;
    let mut globs = classify_interface(&mesh, &partition)?;
    select_corners(&mut globs, &mesh, CornerSelection::Heuristic)?;
    print!("{}", globs.report());

    for policy in [ConstraintPolicy::CornersOnly, ConstraintPolicy::CornersEdges, ConstraintPolicy::CornersEdgesFaces] {
        println!("{}: {} coarse nodes", policy.name(), coarse_nodes(&globs, &mesh, policy).len());
    }
    Ok(())
}
