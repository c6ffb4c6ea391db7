//! Fixed-class multi-user equilibrium solvers.
//!
//! With a common value of time and flow-independent class distance costs the
//! equilibrium is the minimiser of one convex program,
//!
//! ```text
//! Φ(x) = γ Σ_a ∫₀^{x_a} t_a(ω) dω + Σ_m Σ_a C_m l_a x_{a,m}
//! ```
//!
//! subject to separate demand conservation for each class. The link-based
//! solvers (`fw`, `bfw`) minimise it directly; the path-based solvers
//! (`primal_dual`, `extra_gradient`) iterate on path flows of working path
//! sets grown by column generation and also handle hard link capacities
//! through multipliers.

mod frank_wolfe;
mod instance;
mod io;
mod path_based;
mod simplex;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::GeneralizedCost;
use crate::demand::{ClassDemand, VehicleClass};
use crate::error::{Error, Result};
use crate::network::Network;

pub use io::{read_solution_csv, write_solution_csv, write_solution_json, LinkRecord, SolutionDump};
pub use simplex::project_simplex;
pub use verify::{
    beckmann_objective, evaluate_path_costs, kkt_report, wardrop_residual, KktReport, PairViolation,
    WardropResidual,
};

/// Paths carrying less than this fraction of their set's demand are dropped.
pub const PATH_DROP_FRACTION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Frank-Wolfe with exact line search.
    Fw,
    /// Bi-conjugate Frank-Wolfe.
    Bfw,
    /// Projected primal-dual gradient on path flows.
    PrimalDual,
    /// Extra-gradient on path flows.
    ExtraGradient,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fw, Method::Bfw, Method::PrimalDual, Method::ExtraGradient];

    pub fn is_path_based(self) -> bool {
        matches!(self, Method::PrimalDual | Method::ExtraGradient)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fw => "fw",
            Method::Bfw => "bfw",
            Method::PrimalDual => "primal_dual",
            Method::ExtraGradient => "extra_gradient",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fw" => Ok(Method::Fw),
            "bfw" => Ok(Method::Bfw),
            "pd" | "primal_dual" => Ok(Method::PrimalDual),
            "eg" | "extra_gradient" => Ok(Method::ExtraGradient),
            other => Err(Error::Domain(format!("unknown method {other}"))),
        }
    }
}

/// Starting point of a cold start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// All demand on the free-flow shortest path.
    #[default]
    AllOrNothing,
    /// Demand spread evenly over a few successively loaded shortest paths.
    Uniform,
}

/// Hard upper bound on a link's aggregate flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityConstraint {
    pub link_id: String,
    /// veh/h
    pub capacity: f64,
}

impl CapacityConstraint {
    pub fn new(link_id: impl Into<String>, capacity: f64) -> Self {
        Self {
            link_id: link_id.into(),
            capacity,
        }
    }

    /// Reads `link_id,capacity` rows.
    pub fn load_csv<R: std::io::Read>(reader: R) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for (i, rec) in csv::Reader::from_reader(reader).deserialize::<Self>().enumerate() {
            out.push(rec.map_err(|e| Error::Schema {
                row: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once the largest relative Wardrop violation is at or below this.
    pub rel_gap_tol: f64,
    /// Primal step α (primal-dual). `None` picks `1/L` from link-time slopes
    /// at the current flows every iteration.
    pub primal_step: Option<f64>,
    /// Dual step β (primal-dual).
    pub dual_step: f64,
    /// Step τ (extra-gradient). `None` picks it from the current flows.
    pub eg_step: Option<f64>,
    /// Threshold ε on `‖Δf‖² + ‖Δλ‖²` for the path-based solvers.
    pub change_tol: f64,
    pub capacity_constraints: Vec<CapacityConstraint>,
    /// Multipliers beyond this norm signal infeasible capacity constraints.
    pub dual_bound: f64,
    pub init: Initialization,
    /// Worker threads for shortest-path searches; 0 uses the global pool.
    pub threads: usize,
    /// Reserved for randomized tie-breaking; every method is deterministic.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Bfw,
            max_iters: 20_000,
            rel_gap_tol: 1e-4,
            primal_step: None,
            dual_step: 0.05,
            eg_step: None,
            change_tol: 1e-10,
            capacity_constraints: Vec::new(),
            dual_bound: 1e6,
            init: Initialization::AllOrNothing,
            threads: 0,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rel_gap_tol", self.rel_gap_tol)?;
        positive("change_tol", self.change_tol)?;
        positive("dual_step", self.dual_step)?;
        positive("dual_bound", self.dual_bound)?;
        if let Some(a) = self.primal_step {
            positive("primal_step", a)?;
        }
        if let Some(t) = self.eg_step {
            positive("eg_step", t)?;
        }
        for c in &self.capacity_constraints {
            positive("capacity constraint", c.capacity)?;
        }
        Ok(())
    }
}

/// Per-class and aggregate link flows (veh/h), indexed like `Network::links`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFlows {
    pub per_class: [Vec<f64>; 2],
    pub total: Vec<f64>,
}

impl LinkFlows {
    pub fn zeros(links: usize) -> Self {
        Self {
            per_class: [vec![0.0; links], vec![0.0; links]],
            total: vec![0.0; links],
        }
    }

    pub fn from_classes(gv: Vec<f64>, ev: Vec<f64>) -> Self {
        let total = gv.iter().zip(&ev).map(|(a, b)| a + b).collect();
        Self {
            per_class: [gv, ev],
            total,
        }
    }

    pub fn class(&self, class: VehicleClass) -> &[f64] {
        &self.per_class[class.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFlow {
    /// Link indices from origin to destination.
    pub links: Vec<usize>,
    pub flow: f64,
}

/// Working paths of one class for one OD pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdPaths {
    pub origin: String,
    pub destination: String,
    pub demand: f64,
    pub paths: Vec<PathFlow>,
}

impl OdPaths {
    /// Paths carrying more than `fraction` of the demand, as link sequences.
    pub fn active(&self, fraction: f64) -> Vec<&[usize]> {
        self.paths
            .iter()
            .filter(|p| self.demand > 0.0 && p.flow > fraction * self.demand)
            .map(|p| p.links.as_slice())
            .collect()
    }
}

/// Path flows per class, one entry per (non intra-zonal) OD pair in demand order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub classes: [Vec<OdPaths>; 2],
}

impl PathSet {
    pub fn class(&self, class: VehicleClass) -> &[OdPaths] {
        &self.classes[class.index()]
    }

    /// Rebuilds per-class link flows from the path flows.
    pub fn link_flows(&self, link_count: usize) -> LinkFlows {
        let mut per_class = [vec![0.0; link_count], vec![0.0; link_count]];
        for (m, sets) in self.classes.iter().enumerate() {
            for set in sets {
                for p in &set.paths {
                    for &a in &p.links {
                        per_class[m][a] += p.flow;
                    }
                }
            }
        }
        let [gv, ev] = per_class;
        LinkFlows::from_classes(gv, ev)
    }
}

/// Multiplier of one capacity constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDual {
    pub link_id: String,
    pub capacity: f64,
    pub flow: f64,
    pub lambda: f64,
}

/// Equilibrium cost of one class on one OD pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdCost {
    pub class: VehicleClass,
    pub origin: String,
    pub destination: String,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Largest relative Wardrop violation at the start of the iteration.
    pub relative_gap: f64,
    /// Objective (Lagrangian when capacities are constrained).
    pub objective: f64,
    /// Step actually taken (line-search θ, α or τ).
    pub step: f64,
    /// `‖Δf‖² + ‖Δλ‖²` of the update (path-based solvers).
    pub change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub method: Method,
    pub penetration: f64,
    pub link_flows: LinkFlows,
    /// Travel time per link at the final flows, minutes.
    pub link_times: Vec<f64>,
    pub paths: Option<PathSet>,
    pub duals: Vec<LinkDual>,
    pub od_costs: Vec<OdCost>,
    pub gap_trace: Vec<IterationRecord>,
    /// Largest relative Wardrop violation of the returned flows.
    pub relative_gap: f64,
    pub beckmann_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `Σ |λ_a (c_a − x_a)|` over constrained links.
    pub complementarity_residual: f64,
    /// Demand on OD pairs whose origin and destination share an access node.
    pub skipped_intrazonal_demand: f64,
}

/// Solves with the method named in `options`, from a cold start.
pub fn solve(
    network: &Network,
    demand: &ClassDemand,
    cost: &GeneralizedCost,
    options: &SolverOptions,
) -> Result<EquilibriumSolution> {
    solve_from(network, demand, cost, options, None)
}

/// Like [`solve`], optionally warm-started from an earlier path set over the
/// same OD pairs (path flows are rescaled to the new class demand).
pub fn solve_from(
    network: &Network,
    demand: &ClassDemand,
    cost: &GeneralizedCost,
    options: &SolverOptions,
    warm_start: Option<&PathSet>,
) -> Result<EquilibriumSolution> {
    options.validate()?;
    let inst = instance::Instance::new(network, demand, cost, options)?;
    match options.method {
        Method::Fw | Method::Bfw => frank_wolfe::run(&inst, options, warm_start),
        Method::PrimalDual => path_based::run_primal_dual(&inst, options, warm_start),
        Method::ExtraGradient => path_based::run_extra_gradient(&inst, options, warm_start),
    }
}

/// Frank-Wolfe (`options.method == Bfw` selects the bi-conjugate variant).
pub fn solve_fw(
    network: &Network,
    demand: &ClassDemand,
    cost: &GeneralizedCost,
    options: &SolverOptions,
) -> Result<EquilibriumSolution> {
    let mut o = options.clone();
    if o.method != Method::Bfw {
        o.method = Method::Fw;
    }
    solve(network, demand, cost, &o)
}

pub fn solve_primal_dual(
    network: &Network,
    demand: &ClassDemand,
    cost: &GeneralizedCost,
    options: &SolverOptions,
) -> Result<EquilibriumSolution> {
    let o = SolverOptions {
        method: Method::PrimalDual,
        ..options.clone()
    };
    solve(network, demand, cost, &o)
}

pub fn solve_extra_gradient(
    network: &Network,
    demand: &ClassDemand,
    cost: &GeneralizedCost,
    options: &SolverOptions,
) -> Result<EquilibriumSolution> {
    let o = SolverOptions {
        method: Method::ExtraGradient,
        ..options.clone()
    };
    solve(network, demand, cost, &o)
}
