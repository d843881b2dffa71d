//! The interface Schur complement applied matrix-free versus its dense form.

use mlbddc::fem::{subassemble_subdomain, DofMap, ProblemSpec};
use mlbddc::partition::{partition_auto, LevelMesh};
use mlbddc::substructuring::InterfaceProblem;
use nalgebra::DVector;

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::poisson(2);
    let mesh = spec.build_mesh(2, 8, 1.0)?;
    let partition = partition_auto(&LevelMesh::from_mesh(&mesh), 4, 1)?;
    let parts = partition
        .subdomain_elements()
        .iter()
        .map(|elems| subassemble_subdomain(&spec, &mesh, elems))
        .collect::<mlbddc::Result<Vec<_>>>()?;
    let n_dofs = DofMap::new(&mesh).n_free;
    let problem = InterfaceProblem::new(1, n_dofs, parts)?;

    let s = problem.schur_dense()?;
    let x: Vec<f64> = (0..problem.n_interface()).map(|i| (i as f64).sin()).collect();
    let y = problem.schur_apply(&x)?;
    let diff = (DVector::from_vec(y) - &s * DVector::from_vec(x)).amax();
    let eig = s.symmetric_eigen().eigenvalues;
    println!("interface size {}, max |S x - S_dense x| = {diff:.2e}", problem.n_interface());
    println!("spectrum of S: [{:.4}, {:.4}]", eig.min(), eig.max());
    Ok(())
}
