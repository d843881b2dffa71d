//! Two-level BDDC on the unit square: 32x32 elements, 4x4 subdomains.

use mlbddc::bddc::{BddcOptions, MultilevelBddc};
use mlbddc::fem::{assemble_rhs, ProblemSpec};
use mlbddc::krylov::{pcg, DEFAULT_TOL};

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::poisson(2);
    let mesh = spec.build_mesh(2, 32, 1.0)?;
    let f = assemble_rhs(&spec, &mesh)?;

    let bddc = MultilevelBddc::setup(&spec, &mesh, &[16], &BddcOptions::default())?;
    let problem = bddc.interface_problem();
    let g = problem.condensed_rhs(&f)?;
    let (u, report) = pcg(|x| problem.schur_apply(x), |r| bddc.apply(r), &g, DEFAULT_TOL, 200)?;
    let x = problem.recover_interior(&u, &f)?;

    println!("dofs {}, interface {}, coarse {:?}", problem.n_dofs, problem.n_interface(), bddc.coarse_sizes());
    println!(
        "pcg: {} iterations, residual {:.2e}, condition {:.3}",
        report.iterations,
        report.final_relative_residual,
        report.condition_estimate.unwrap_or(f64::NAN)
    );
    println!("max u = {:.6}", x.iter().cloned().fold(f64::MIN, f64::max));
    Ok(())
}
