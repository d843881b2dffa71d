//! Writes a solved 3D elasticity problem to `elasticity.vtk`.

use std::path::Path;

use mlbddc::harness::{export_vtk, RunConfig};

fn main() -> mlbddc::Result<()> {
    let config = RunConfig::parse_str("problem=elasticity dim=3 n=8 subdomains=8/1")?;
    let path = Path::new("elasticity.vtk");
    let out = export_vtk(&config, path)?;
    println!("{} ({} iterations) -> {}", out.row.hierarchy, out.row.iterations, path.display());
    Ok(())
}
