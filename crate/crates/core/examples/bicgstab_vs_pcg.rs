//! Same BDDC preconditioner under PCG and BiCGstab.

use mlbddc::bddc::{BddcOptions, MultilevelBddc};
use mlbddc::fem::{assemble_rhs, ProblemSpec};
use mlbddc::krylov::{bicgstab, pcg};

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::elasticity();
    let mesh = spec.build_mesh(2, 32, 1.0)?;
    let f = assemble_rhs(&spec, &mesh)?;
    let bddc = MultilevelBddc::setup(&spec, &mesh, &[64, 4], &BddcOptions::default())?;
    let p = bddc.interface_problem();
    let g = p.condensed_rhs(&f)?;

    let (_, cg) = pcg(|x| p.schur_apply(x), |x| bddc.apply(x), &g, 1e-8, 500)?;
    let (_, bi) = bicgstab(|x| p.schur_apply(x), |x| bddc.apply(x), &g, 1e-8, 500)?;
    for (name, r) in [("pcg", cg), ("bicgstab", bi)] {
        println!("{name:>9}: {:3} iterations, final residual {:.2e}", r.iterations, r.final_relative_residual);
    }
    Ok(())
}
