//! 3D elasticity on 12^3 hexahedra with two, three and four levels.

use mlbddc::bddc::{BddcOptions, MultilevelBddc};
use mlbddc::fem::{assemble_rhs, ProblemSpec};
use mlbddc::krylov::{pcg, DEFAULT_TOL};

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::elasticity();
    let mesh = spec.build_mesh(3, 12, 1.0)?;
    let f = assemble_rhs(&spec, &mesh)?;

    for hierarchy in [vec![64], vec![64, 8], vec![64, 8, 2]] {
        let bddc = MultilevelBddc::setup(&spec, &mesh, &hierarchy, &BddcOptions::default())?;
        let p = bddc.interface_problem();
        let g = p.condensed_rhs(&f)?;
        let (_, r) = pcg(|x| p.schur_apply(x), |x| bddc.apply(x), &g, DEFAULT_TOL, 1000)?;
        println!(
            "levels {} coarse {:?}: {} iterations, condition {:.2}",
            bddc.n_levels(),
            bddc.coarse_sizes(),
            r.iterations,
            r.condition_estimate.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
