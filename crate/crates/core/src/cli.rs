//! File-based pipeline behind the `mue` binary: validate inputs, solve one
//! penetration level, or sweep a range of levels.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{run_sweep_with, SweepOptions, SweepResult};
use crate::cost::{CostConfig, GeneralizedCost};
use crate::demand::{split_demand, OdMatrix};
use crate::equilibrium::{solve, write_solution_csv, write_solution_json, CapacityConstraint, EquilibriumSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::network::{load_network, load_zones, Network};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Environment variable capping solver worker threads (0 = automatic).
pub const THREADS_ENV: &str = "MUE_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Domain(format!("unknown format {other}"))),
        }
    }
}

/// Comma-separated formats, e.g. `csv,json`.
pub fn parse_formats(s: &str) -> Result<Vec<Format>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let f: Format = part.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no output format given".into()));
    }
    Ok(out)
}

/// Either a comma list (`0,0.5,1`) or `start:end:step`.
pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| Error::Domain(format!("bad penetration level {p:?}")))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Domain(format!("range {s:?} is not start:end:step")));
        }
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || end < start {
            return Err(Error::Domain(format!("range {s:?} is empty")));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // rounding keeps 0.05 steps on their decimal values
        Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
    } else {
        s.split(',').filter(|p| !p.trim().is_empty()).map(num).collect()
    }
}

/// Worker count from [`THREADS_ENV`]; unset or unparsable means automatic.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nodes: PathBuf,
    pub links: PathBuf,
    pub zones: PathBuf,
    pub od: PathBuf,
    pub cost_config: PathBuf,
    pub capacity_constraints: Option<PathBuf>,
    pub solver: SolverOptions,
    pub penetration: f64,
    pub levels: Vec<f64>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    /// Config reading `nodes.csv`, `links.csv`, `zones.csv`, `od.csv` and
    /// `cost.json` from one directory.
    pub fn from_dir(dir: &Path, out: &Path) -> Self {
        Self {
            nodes: dir.join("nodes.csv"),
            links: dir.join("links.csv"),
            zones: dir.join("zones.csv"),
            od: dir.join("od.csv"),
            cost_config: dir.join("cost.json"),
            capacity_constraints: None,
            solver: SolverOptions::default(),
            penetration: 0.0,
            levels: vec![0.0, 1.0],
            out: out.to_path_buf(),
            formats: vec![Format::Csv, Format::Json],
        }
    }

    fn input_files(&self) -> Vec<&Path> {
        let mut v = vec![
            self.nodes.as_path(),
            self.links.as_path(),
            self.zones.as_path(),
            self.od.as_path(),
            self.cost_config.as_path(),
        ];
        if let Some(c) = &self.capacity_constraints {
            v.push(c.as_path());
        }
        v
    }
}

/// Everything loaded from a run config.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub network: Network,
    pub od: OdMatrix,
    pub cost_config: CostConfig,
    pub cost: GeneralizedCost,
    pub capacity_constraints: Vec<CapacityConstraint>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    if let Some(missing) = config.input_files().into_iter().find(|p| !p.exists()) {
        return Err(Error::MissingFile(missing.to_path_buf()));
    }
    let cost_config = CostConfig::from_json(open(&config.cost_config)?)?;
    let cost = GeneralizedCost::from_config(&cost_config)?;
    let defaults = cost_config.road_classes.unwrap_or_default();
    let base = load_network(open(&config.nodes)?, open(&config.links)?, &defaults)?;
    let zones = load_zones(open(&config.zones)?)?;
    let network = base.generate_connectors(&zones)?;
    let od = OdMatrix::load_csv(open(&config.od)?)?;
    let unknown: Vec<String> = od
        .entries()
        .iter()
        .flat_map(|e| [&e.origin, &e.destination])
        .filter(|z| network.zone(z).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        let mut unknown = unknown;
        unknown.sort();
        unknown.dedup();
        return Err(Error::Referential(format!("OD references unknown zones: {}", unknown.join(", "))));
    }
    let capacity_constraints = match &config.capacity_constraints {
        Some(p) => {
            let c = CapacityConstraint::load_csv(open(p)?)?;
            if let Some(bad) = c.iter().find(|c| network.link_idx(&c.link_id).is_none()) {
                return Err(Error::Referential(format!("capacity constraint on unknown link {}", bad.link_id)));
            }
            c
        }
        None => Vec::new(),
    };
    Ok(Inputs {
        network,
        od,
        cost_config,
        cost,
        capacity_constraints,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub zones: usize,
    pub nodes: usize,
    pub road_links: usize,
    pub connector_links: usize,
    pub od_pairs: usize,
    pub total_demand: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} zones, {} nodes, {} links ({} road + {} connectors), {} OD pair{}, demand {}",
            self.zones,
            self.nodes,
            self.road_links + self.connector_links,
            self.road_links,
            self.connector_links,
            self.od_pairs,
            if self.od_pairs == 1 { "" } else { "s" },
            self.total_demand
        )
    }
}

pub fn cmd_validate(config: &RunConfig) -> Result<ValidationReport> {
    let inputs = load_inputs(config)?;
    let connectors = inputs.network.links().iter().filter(|l| l.is_connector()).count();
    Ok(ValidationReport {
        zones: inputs.network.zones().len(),
        nodes: inputs.network.node_count(),
        road_links: inputs.network.link_count() - connectors,
        connector_links: connectors,
        od_pairs: inputs.od.len(),
        total_demand: inputs.od.total_demand(),
    })
}

fn solver_options(config: &RunConfig, inputs: &Inputs) -> SolverOptions {
    let mut o = config.solver.clone();
    if o.capacity_constraints.is_empty() {
        o.capacity_constraints = inputs.capacity_constraints.clone();
    }
    o
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub struct SolveOutcome {
    pub solution: EquilibriumSolution,
    pub metrics: MetricsReport,
}

/// Solves at `config.penetration` and writes `solution.*` and `metrics*`
/// into the output directory, also when the iteration cap was hit.
pub fn cmd_solve(config: &RunConfig) -> Result<SolveOutcome> {
    let inputs = load_inputs(config)?;
    let demand = split_demand(&inputs.od, config.penetration)?;
    let options = solver_options(config, &inputs);
    let solution = solve(&inputs.network, &demand, &inputs.cost, &options)?;
    let metrics = MetricsReport::compute(&solution, &inputs.network, &demand)?;
    std::fs::create_dir_all(&config.out)?;
    for f in &config.formats {
        match f {
            Format::Json => {
                write_solution_json(&solution, &inputs.network, create(&config.out, "solution.json")?)?;
                metrics.write_json(create(&config.out, "metrics.json")?)?;
            }
            Format::Csv => {
                write_solution_csv(&solution, &inputs.network, create(&config.out, "solution.csv")?)?;
                metrics.write_links_csv(create(&config.out, "metrics_links.csv")?)?;
                metrics.write_summary_csv(create(&config.out, "metrics_summary.csv")?)?;
            }
        }
    }
    Ok(SolveOutcome { solution, metrics })
}

fn write_sweep(config: &RunConfig, sweep: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(&config.out)?;
    for f in &config.formats {
        match f {
            Format::Csv => sweep.write_csv(create(&config.out, "sweep.csv")?)?,
            Format::Json => sweep.write_json(create(&config.out, "sweep.json")?)?,
        }
    }
    sweep.write_series(&config.out)
}

/// Runs the sweep over `config.levels` and writes `sweep.*` plus the
/// `series_*.csv` files. A partial sweep still writes the completed levels.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepResult> {
    let inputs = load_inputs(config)?;
    let options = SweepOptions {
        solver: solver_options(config, &inputs),
        ..Default::default()
    };
    match run_sweep_with(&inputs.network, &inputs.od, &inputs.cost, &config.levels, &options) {
        Ok(sweep) => {
            write_sweep(config, &sweep)?;
            Ok(sweep)
        }
        Err(Error::PartialSweep {
            level,
            completed,
            source,
        }) => {
            if !completed.records.is_empty() {
                write_sweep(config, &completed)?;
            }
            Err(Error::PartialSweep {
                level,
                completed,
                source,
            })
        }
        Err(e) => Err(e),
    }
}

/// Process exit code for an error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Infeasible(_) | Error::DualUnbounded { .. } => EXIT_INFEASIBLE,
        Error::PartialSweep { source, .. } => match exit_code(source) {
            EXIT_INFEASIBLE => EXIT_INFEASIBLE,
            _ => EXIT_CONVERGENCE,
        },
        Error::Divergence(_) => EXIT_CONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

/// Machine-readable error line printed on failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub items: Vec<String>,
}

impl ErrorReport {
    pub fn new(error: &Error) -> Self {
        let (kind, items) = match error {
            Error::Schema { .. } => ("schema", vec![]),
            Error::Referential(_) => ("referential", vec![]),
            Error::Validation(_) => ("validation", vec![]),
            Error::Domain(_) => ("domain", vec![]),
            Error::Contract(_) => ("contract", vec![]),
            Error::Undefined(_) => ("undefined", vec![]),
            Error::Unsupported(_) => ("unsupported", vec![]),
            Error::UnattachedZones(z) => ("unattached_zones", z.clone()),
            Error::Infeasible(p) => ("infeasible", p.iter().map(|(o, d)| format!("{o}->{d}")).collect()),
            Error::Divergence(_) => ("divergence", vec![]),
            Error::DualUnbounded { .. } => ("dual_unbounded", vec![]),
            Error::LinkSetMismatch { .. } => ("link_set_mismatch", vec![]),
            Error::PartialSweep { .. } => ("partial_sweep", vec![]),
            Error::MissingFile(p) => ("missing_file", vec![p.display().to_string()]),
            Error::Io(_) => ("io", vec![]),
            Error::Csv(_) => ("csv", vec![]),
            Error::Json(_) => ("json", vec![]),
        };
        Self {
            kind: kind.to_string(),
            message: error.to_string(),
            exit_code: exit_code(error),
            items,
        }
    }
}
