//! Fixed H/h = 8, growing subdomain grids, CSV to stdout.

use mlbddc::harness::{self, RunConfig};

fn main() -> mlbddc::Result<()> {
    let base = RunConfig::parse_str("policy=corners+edges tol=1e-8")?;
    let configs = harness::parse_sweep(
        "n=16 subdomains=4/1\n\
         n=32 subdomains=16/1\n\
         n=64 subdomains=64/1\n\
         n=64 subdomains=64/4/1\n",
        &base,
    )?;
    let rows = harness::sweep(&configs)?;
    harness::write_csv(&rows, std::io::stdout().lock())
}
