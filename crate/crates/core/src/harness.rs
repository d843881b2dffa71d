//! Benchmark driver: run configurations, single runs and sweeps, CSV rows.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bddc::{BddcOptions, MultilevelBddc};
use crate::error::{Error, Result};
use crate::fem::{assemble_rhs, write_vtk, BoxFace, DofMap, Mesh, ProblemKind, ProblemSpec};
use crate::interface::{ConstraintPolicy, CornerSelection, WeightScheme};
use crate::krylov::{bicgstab, pcg, SolveReport, DEFAULT_MAX_IT, DEFAULT_TOL};
use crate::partition::PartitionMethod;

/// Overrides the configured worker count when set.
pub const WORKERS_ENV: &str = "MLBDDC_WORKERS";

pub const CSV_HEADER: &str = "problem,dim,n_elems,levels,hierarchy,policy,krylov,n_dofs,n_interface,coarse_sizes,condition,iterations,rel_residual,converged,setup_s,krylov_s";

/// Columns that vary between otherwise identical runs.
pub const TIMING_COLUMNS: [&str; 2] = ["setup_s", "krylov_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Pcg,
    Bicgstab,
}

impl KrylovMethod {
    pub fn name(self) -> &'static str {
        match self {
            KrylovMethod::Pcg => "pcg",
            KrylovMethod::Bicgstab => "bicgstab",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub dim: usize,
    pub n_elems_per_axis: usize,
    pub length: f64,
    pub diffusivity: f64,
    pub young: f64,
    pub poisson_ratio: f64,
    /// Total levels including the top coarse problem.
    pub levels: usize,
    /// Subdomains on levels `1..levels`.
    pub subdomain_counts: Vec<usize>,
    pub policy: ConstraintPolicy,
    pub weights: WeightScheme,
    pub corners: CornerSelection,
    /// `None` picks regular blocks when they fit the box.
    pub partition: Option<PartitionMethod>,
    pub krylov: KrylovMethod,
    pub tol: f64,
    pub max_it: usize,
    pub workers: Option<usize>,
    pub deterministic: bool,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemKind::Poisson,
            dim: 2,
            n_elems_per_axis: 16,
            length: 1.0,
            diffusivity: 1.0,
            young: 1.0,
            poisson_ratio: 0.3,
            levels: 2,
            subdomain_counts: vec![4],
            policy: ConstraintPolicy::CornersEdgesFaces,
            weights: WeightScheme::Cardinality,
            corners: CornerSelection::Heuristic,
            partition: None,
            krylov: KrylovMethod::Pcg,
            tol: DEFAULT_TOL,
            max_it: DEFAULT_MAX_IT,
            workers: None,
            deterministic: true,
            output: None,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value {value:?} for {key}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

/// Subdomain counts from `N1/N2/.../1`; the trailing `1` names the top
/// coarse level and is dropped when at least two entries are given.
pub fn parse_hierarchy(s: &str) -> Result<Vec<usize>> {
    let mut counts = s
        .split('/')
        .map(|t| num::<usize>("subdomains", t))
        .collect::<Result<Vec<_>>>()?;
    if counts.len() >= 2 && counts.last() == Some(&1) {
        counts.pop();
    }
    Ok(counts)
}

pub fn format_hierarchy(counts: &[usize]) -> String {
    let mut parts: Vec<String> = counts.iter().map(usize::to_string).collect();
    if counts.last() != Some(&1) {
        parts.push("1".into());
    }
    parts.join("/")
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "problem" => {
                self.problem = match v {
                    "poisson" => ProblemKind::Poisson,
                    "elasticity" => ProblemKind::Elasticity,
                    _ => return Err(bad(key, v)),
                }
            }
            "dim" => self.dim = num(key, v)?,
            "n" | "n_elems" | "n_elems_per_axis" => self.n_elems_per_axis = num(key, v)?,
            "length" => self.length = num(key, v)?,
            "diffusivity" => self.diffusivity = num(key, v)?,
            "young" => self.young = num(key, v)?,
            "nu" | "poisson_ratio" => self.poisson_ratio = num(key, v)?,
            "levels" => self.levels = num(key, v)?,
            "subdomains" | "hierarchy" | "subdomain_counts" => {
                self.subdomain_counts = parse_hierarchy(v)?;
                self.levels = self.subdomain_counts.len() + 1;
            }
            "policy" => self.policy = ConstraintPolicy::parse(v).ok_or_else(|| bad(key, v))?,
            "weights" => {
                self.weights = match v {
                    "cardinality" => WeightScheme::Cardinality,
                    "stiffness" | "stiffness-diagonal" => WeightScheme::StiffnessDiagonal,
                    _ => return Err(bad(key, v)),
                }
            }
            "corners" => {
                self.corners = match v {
                    "heuristic" => CornerSelection::Heuristic,
                    "all" | "all-interface" => CornerSelection::AllInterface,
                    _ => return Err(bad(key, v)),
                }
            }
            "partition" => {
                self.partition = match v {
                    "auto" => None,
                    "regular" | "regular-blocks" => Some(PartitionMethod::RegularBlocks),
                    "greedy" | "graph-growing" => Some(PartitionMethod::GreedyGraphGrowing),
                    _ => return Err(bad(key, v)),
                }
            }
            "krylov" => {
                self.krylov = match v {
                    "pcg" => KrylovMethod::Pcg,
                    "bicgstab" => KrylovMethod::Bicgstab,
                    _ => return Err(bad(key, v)),
                }
            }
            "tol" => self.tol = num(key, v)?,
            "max_it" => self.max_it = num(key, v)?,
            "workers" => self.workers = Some(num(key, v)?),
            "deterministic" => self.deterministic = num(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies whitespace- or newline-separated `key=value` tokens; `#`
    /// starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (k, v) = token
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("expected key=value, got {token:?}")))?;
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_str(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.n_elems_per_axis == 0 {
            return Err(Error::Config("n_elems_per_axis must be positive".into()));
        }
        if !(self.length > 0.0) {
            return Err(Error::Config("length must be positive".into()));
        }
        if self.levels < 2 {
            return Err(Error::Config(format!("at least 2 levels are required, got {}", self.levels)));
        }
        if self.subdomain_counts.len() + 1 != self.levels {
            return Err(Error::Config(format!(
                "{} levels need {} subdomain counts, hierarchy {} has {}",
                self.levels,
                self.levels - 1,
                format_hierarchy(&self.subdomain_counts),
                self.subdomain_counts.len()
            )));
        }
        let c = &self.subdomain_counts;
        if c.iter().any(|&n| n == 0) {
            return Err(Error::Config("subdomain counts must be positive".into()));
        }
        for w in c.windows(2) {
            if !(w[1] < w[0] || w[1] == 1) {
                return Err(Error::Config(format!(
                    "subdomain counts must decrease level by level, got {}",
                    format_hierarchy(c)
                )));
            }
        }
        let n_elems = self.n_elems_per_axis.pow(self.dim as u32);
        if c[0] > n_elems {
            return Err(Error::Config(format!("{} subdomains exceed {n_elems} elements", c[0])));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config("tol must lie in (0, 1)".into()));
        }
        if self.max_it == 0 {
            return Err(Error::Config("max_it must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.problem_spec().validate()
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        let mut spec = match self.problem {
            ProblemKind::Poisson => ProblemSpec::poisson(self.dim),
            ProblemKind::Elasticity => ProblemSpec::elasticity(),
        };
        spec.diffusivity = self.diffusivity;
        spec.young = self.young;
        spec.poisson_ratio = self.poisson_ratio;
        if self.problem == ProblemKind::Elasticity {
            spec.dirichlet_faces = vec![(BoxFace::XMin, 0.0)];
        }
        spec
    }

    pub fn bddc_options(&self) -> BddcOptions {
        BddcOptions {
            policy: self.policy,
            weights: self.weights,
            corners: self.corners,
            deterministic: self.deterministic,
            level1_method: self.partition,
            ..BddcOptions::default()
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        self.problem_spec().build_mesh(self.dim, self.n_elems_per_axis, self.length)
    }

    pub fn hierarchy(&self) -> String {
        format_hierarchy(&self.subdomain_counts)
    }
}

/// Worker count after the environment override.
pub fn effective_workers(config: &RunConfig) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = num(WORKERS_ENV, &v)?;
            if n == 0 {
                return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(config.workers),
    }
}

fn with_workers<T: Send>(config: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match effective_workers(config)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
        None => f(),
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub problem: ProblemKind,
    pub dim: usize,
    pub n_elems: usize,
    pub levels: usize,
    pub hierarchy: String,
    pub policy: ConstraintPolicy,
    pub krylov: KrylovMethod,
    pub n_dofs: usize,
    pub n_interface: usize,
    pub coarse_sizes: Vec<usize>,
    pub condition: Option<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub setup_s: f64,
    pub krylov_s: f64,
}

impl RunRow {
    fn from_config(c: &RunConfig) -> Self {
        RunRow {
            problem: c.problem,
            dim: c.dim,
            n_elems: c.n_elems_per_axis.pow(c.dim as u32),
            levels: c.levels,
            hierarchy: c.hierarchy(),
            policy: c.policy,
            krylov: c.krylov,
            n_dofs: 0,
            n_interface: 0,
            coarse_sizes: Vec::new(),
            condition: None,
            iterations: 0,
            rel_residual: f64::NAN,
            converged: false,
            setup_s: 0.0,
            krylov_s: 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let problem = match self.problem {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Elasticity => "elasticity",
        };
        let coarse: Vec<String> = self.coarse_sizes.iter().map(usize::to_string).collect();
        let mut s = String::new();
        let _ = write!(
            s,
            "{problem},{},{},{},{},{},{},{},{},{},{},{},{:.3e},{},{:.3},{:.3}",
            self.dim,
            self.n_elems,
            self.levels,
            self.hierarchy,
            self.policy.name(),
            self.krylov.name(),
            self.n_dofs,
            self.n_interface,
            coarse.join("/"),
            self.condition.map_or(String::new(), |k| format!("{k:.6}")),
            self.iterations,
            self.rel_residual,
            self.converged,
            self.setup_s,
            self.krylov_s
        );
        s
    }
}

pub fn write_csv<W: Write>(rows: &[RunRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    Ok(())
}

/// A finished run with everything needed for post-processing.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: RunRow,
    pub report: SolveReport,
    pub mesh: Mesh,
    /// Free-dof solution.
    pub solution: Vec<f64>,
    /// Level-1 subdomain of every element.
    pub subdomain_of_element: Vec<usize>,
}

pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    with_workers(config, || run_inner(config))
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let spec = config.problem_spec();
    let mesh = config.build_mesh()?;
    let f = assemble_rhs(&spec, &mesh)?;

    let start = Instant::now();
    let bddc = MultilevelBddc::setup(&spec, &mesh, &config.subdomain_counts, &config.bddc_options())?;
    let setup_s = start.elapsed().as_secs_f64();

    let problem = bddc.interface_problem();
    let start = Instant::now();
    let g = problem.condensed_rhs(&f)?;
    let (u, report) = if problem.n_interface() == 0 {
        // One subdomain: the interior solve is the whole solve.
        let report = SolveReport {
            iterations: 1,
            relative_residuals: vec![1.0, 0.0],
            residual_kind: crate::krylov::ResidualKind::Unpreconditioned,
            final_relative_residual: 0.0,
            condition_estimate: Some(1.0),
            converged: true,
            breakdown_reason: None,
        };
        (Vec::new(), report)
    } else {
        let a = |x: &[f64]| problem.schur_apply(x);
        let m = |r: &[f64]| bddc.apply(r);
        match config.krylov {
            KrylovMethod::Pcg => pcg(a, m, &g, config.tol, config.max_it)?,
            KrylovMethod::Bicgstab => bicgstab(a, m, &g, config.tol, config.max_it)?,
        }
    };
    let solution = problem.recover_interior(&u, &f)?;
    let krylov_s = start.elapsed().as_secs_f64();

    let mut row = RunRow::from_config(config);
    row.levels = bddc.n_levels();
    row.n_dofs = problem.n_dofs;
    row.n_interface = problem.n_interface();
    row.coarse_sizes = bddc.coarse_sizes();
    row.condition = report.condition_estimate;
    row.iterations = report.iterations;
    row.rel_residual = report.final_relative_residual;
    row.converged = report.converged;
    row.setup_s = setup_s;
    row.krylov_s = krylov_s;
    let subdomain_of_element = bddc.levels()[0].partition.assignment.clone();
    Ok(RunOutcome {
        row,
        report,
        mesh,
        solution,
        subdomain_of_element,
    })
}

/// Run configurations from a sweep file: one run per non-empty line,
/// `key=value` tokens applied over `base`.
pub fn parse_sweep(text: &str, base: &RunConfig) -> Result<Vec<RunConfig>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut c = base.clone();
        c.apply_str(content)
            .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        out.push(c);
    }
    Ok(out)
}

/// Runs every configuration in order. A failing run yields a row with
/// `converged = false`; its error goes to stderr.
pub fn sweep(configs: &[RunConfig]) -> Result<Vec<RunRow>> {
    if configs.is_empty() {
        return Err(Error::Config("sweep needs at least one configuration".into()));
    }
    Ok(configs
        .iter()
        .map(|c| match run_experiment(c) {
            Ok(o) => o.row,
            Err(e) => {
                eprintln!("run {} ({}D, {}): {e}", c.hierarchy(), c.dim, c.n_elems_per_axis);
                RunRow::from_config(c)
            }
        })
        .collect())
}

/// Glob reports of every level of the configured hierarchy.
pub fn analyze_globs(config: &RunConfig) -> Result<String> {
    config.validate()?;
    with_workers(config, || {
        let spec = config.problem_spec();
        let mesh = config.build_mesh()?;
        let bddc = MultilevelBddc::setup(&spec, &mesh, &config.subdomain_counts, &config.bddc_options())?;
        let mut out = String::new();
        for level in bddc.levels() {
            out.push_str(&level.globs.report());
            let _ = writeln!(out, "coarse dofs: {}", level.n_coarse());
        }
        Ok(out)
    })
}

/// Solves and writes the mesh with the nodal solution and level-1
/// subdomain ids.
pub fn export_vtk(config: &RunConfig, path: &Path) -> Result<RunOutcome> {
    let outcome = run_experiment(config)?;
    let full = DofMap::new(&outcome.mesh).expand(&outcome.solution);
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(
        &outcome.mesh,
        Some(("solution", &full)),
        Some(("subdomain", &outcome.subdomain_of_element)),
        file,
    )?;
    Ok(outcome)
}

/// Process exit code for a failed run: 3 for arithmetic breakdowns, 2 for
/// everything caused by the input.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchy_notation() {
        assert_eq!(parse_hierarchy("64/8/1").unwrap(), vec![64, 8]);
        assert_eq!(parse_hierarchy("4/1").unwrap(), vec![4]);
        assert_eq!(parse_hierarchy("4/1/1").unwrap(), vec![4, 1]);
        assert_eq!(parse_hierarchy("1").unwrap(), vec![1]);
        assert_eq!(parse_hierarchy("16").unwrap(), vec![16]);
        assert!(parse_hierarchy("4/x").is_err());
        assert_eq!(format_hierarchy(&[64, 8]), "64/8/1");
        assert_eq!(format_hierarchy(&[4, 1]), "4/1");
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = RunConfig::parse_str("problem=elasticity dim=3\n# comment\nn=6 subdomains=8/1 tol=1e-8").unwrap();
        assert_eq!(c.problem, ProblemKind::Elasticity);
        assert_eq!((c.dim, c.n_elems_per_axis, c.levels), (3, 6, 2));
        assert_eq!(c.subdomain_counts, vec![8]);
        c.validate().unwrap();

        let c = RunConfig::parse_str("subdomains=4/8/1").unwrap();
        assert!(c.validate().unwrap_err().is_config());
        let c = RunConfig::parse_str("subdomains=4/2/1 levels=2").unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::parse_str("bogus=1").is_err());
        assert!(RunConfig::parse_str("dim").is_err());
        assert!(RunConfig::parse_str("krylov=gmres").is_err());
    }

    #[test]
    fn small_run() {
        let c = RunConfig::parse_str("n=16 subdomains=4/1").unwrap();
        let out = run_experiment(&c).unwrap();
        assert!(out.row.converged);
        assert!(out.row.iterations <= 30);
        assert!(out.row.condition.unwrap() >= 1.0);
        assert_eq!(out.row.coarse_sizes.len(), 1);
    }

    #[test]
    fn single_subdomain_counts_one_iteration() {
        let c = RunConfig::parse_str("n=8 subdomains=1").unwrap();
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.row.iterations, 1);
        assert!(out.row.converged);
    }

    #[test]
    fn sweep_keeps_order_and_duplicates() {
        let base = RunConfig::default();
        let configs = parse_sweep("n=8 subdomains=4/1\n\nn=8 subdomains=16/4/1 # three levels\nn=8 subdomains=4/1\n", &base).unwrap();
        let rows = sweep(&configs).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].levels, 3);
        assert_eq!(rows[0].to_csv().split(',').count(), CSV_HEADER.split(',').count());
        assert!(sweep(&[]).is_err());
    }

    #[test]
    fn failing_run_is_marked() {
        let mut c = RunConfig::parse_str("n=4 subdomains=4/1").unwrap();
        c.partition = Some(PartitionMethod::RegularBlocks);
        c.subdomain_counts = vec![3];
        let rows = sweep(&[c]).unwrap();
        assert!(!rows[0].converged);
    }
}
