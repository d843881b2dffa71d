//! Level partitions of a multilevel hierarchy, regular and greedy.

use mlbddc::bddc::{BddcOptions, MultilevelBddc};
use mlbddc::fem::ProblemSpec;
use mlbddc::partition::PartitionMethod;

fn main() -> mlbddc::Result<()> {
    let spec = ProblemSpec::poisson(2);
    let mesh = spec.build_mesh(2, 24, 1.0)?;
    for method in [PartitionMethod::RegularBlocks, PartitionMethod::GreedyGraphGrowing] {
        let opts = BddcOptions {
            level1_method: Some(method),
            ..Default::default()
        };
        let bddc = MultilevelBddc::setup(&spec, &mesh, &[36, 9, 3], &opts)?;
        println!("{method:?}");
        for level in bddc.levels() {
            let (f, e, v) = level.globs.counts();
            println!(
                "  level {}: {} elements -> {} subdomains, sizes {:?}, globs {f}/{e}/{v}, coarse dofs {}",
                level.level,
                level.mesh.element_nodes.len(),
                level.partition.n_subdomains,
                level.partition.sizes(),
                level.n_coarse()
            );
        }
    }
    Ok(())
}
