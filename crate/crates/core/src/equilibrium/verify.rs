//! Equilibrium checks that work from a returned solution alone.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::instance::relative_violation;
use super::{EquilibriumSolution, LinkFlows};
use crate::cost::GeneralizedCost;
use crate::demand::{ClassDemand, VehicleClass};
use crate::error::{Error, Result};
use crate::network::{shortest_path::dijkstra, Network};

/// Wardrop violation of one class on one OD pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairViolation {
    pub class: VehicleClass,
    pub origin: String,
    pub destination: String,
    /// Fresh shortest generalized path cost μ at the solution's flows.
    pub shortest: f64,
    /// Flow-weighted mean cost of the used paths.
    pub mean: f64,
    /// `(mean − shortest) / shortest`
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardropResidual {
    pub per_pair: Vec<PairViolation>,
    pub max: f64,
}

/// Per-(class, OD) relative Wardrop violation of `solution`.
///
/// Link costs include the solution's capacity multipliers. Solutions without
/// path flows are checked per class on total cost instead, reported with `*`
/// as origin and destination.
pub fn wardrop_residual(
    solution: &EquilibriumSolution,
    network: &Network,
    class_demand: &ClassDemand,
    cost: &GeneralizedCost,
) -> Result<WardropResidual> {
    let costs = class_link_costs(solution, network, cost)?;
    let mut per_pair = Vec::new();
    match &solution.paths {
        Some(paths) => {
            for m in VehicleClass::ALL {
                let lookup: HashMap<(&str, &str), _> = paths
                    .class(m)
                    .iter()
                    .map(|s| ((s.origin.as_str(), s.destination.as_str()), s))
                    .collect();
                let mut trees = HashMap::new();
                for (i, (o, d)) in class_demand.pairs().iter().enumerate() {
                    let q = class_demand.demand(m)[i];
                    if q <= 0.0 {
                        continue;
                    }
                    let (on, dn) = access_nodes(network, o, d)?;
                    if on == dn {
                        continue;
                    }
                    let set = lookup.get(&(o.as_str(), d.as_str())).ok_or_else(|| {
                        Error::Referential(format!("solution has no {m} paths for {o}->{d}"))
                    })?;
                    let tree = trees
                        .entry(on)
                        .or_insert_with(|| dijkstra(network, &costs[m.index()], on));
                    let shortest = tree.cost[dn];
                    let mut mean = 0.0;
                    for p in &set.paths {
                        mean += p.flow * p.links.iter().map(|&a| costs[m.index()][a]).sum::<f64>();
                    }
                    mean /= q;
                    per_pair.push(PairViolation {
                        class: m,
                        origin: o.clone(),
                        destination: d.clone(),
                        shortest,
                        mean,
                        violation: relative_violation(mean, shortest),
                    });
                }
            }
        }
        None => {
            for m in VehicleClass::ALL {
                let mut assigned = 0.0;
                for (f, c) in solution.link_flows.class(m).iter().zip(&costs[m.index()]) {
                    assigned += f * c;
                }
                let mut trees = HashMap::new();
                let mut lower = 0.0;
                let mut total = 0.0;
                for (i, (o, d)) in class_demand.pairs().iter().enumerate() {
                    let q = class_demand.demand(m)[i];
                    let (on, dn) = access_nodes(network, o, d)?;
                    if q <= 0.0 || on == dn {
                        continue;
                    }
                    let tree = trees
                        .entry(on)
                        .or_insert_with(|| dijkstra(network, &costs[m.index()], on));
                    lower += q * tree.cost[dn];
                    total += q;
                }
                if total > 0.0 {
                    per_pair.push(PairViolation {
                        class: m,
                        origin: "*".into(),
                        destination: "*".into(),
                        shortest: lower / total,
                        mean: assigned / total,
                        violation: relative_violation(assigned, lower),
                    });
                }
            }
        }
    }
    let max = per_pair.iter().map(|p| p.violation).fold(0.0, f64::max);
    Ok(WardropResidual { per_pair, max })
}

fn access_nodes(network: &Network, o: &str, d: &str) -> Result<(usize, usize)> {
    let zone = |id: &str| {
        network
            .zone(id)
            .map(|z| z.access_node())
            .ok_or_else(|| Error::Referential(format!("unknown zone {id}")))
    };
    Ok((zone(o)?, zone(d)?))
}

fn class_link_costs(
    solution: &EquilibriumSolution,
    network: &Network,
    cost: &GeneralizedCost,
) -> Result<[Vec<f64>; 2]> {
    if solution.link_flows.total.len() != network.link_count() {
        return Err(Error::Contract(format!(
            "solution has {} links, network {}",
            solution.link_flows.total.len(),
            network.link_count()
        )));
    }
    let mut lambda = vec![0.0; network.link_count()];
    for d in &solution.duals {
        let a = network
            .link_idx(&d.link_id)
            .ok_or_else(|| Error::Referential(format!("dual on unknown link {}", d.link_id)))?;
        lambda[a] += d.lambda;
    }
    Ok(VehicleClass::ALL.map(|m| {
        network
            .links()
            .iter()
            .zip(&solution.link_flows.total)
            .zip(&lambda)
            .map(|((l, &x), lam)| cost.link_cost(l, x, m) + lam)
            .collect()
    }))
}

/// `γ Σ_a ∫₀^{x_a} t_a + Σ_m Σ_a C_m l_a x_{a,m}`.
pub fn beckmann_objective(link_flows: &LinkFlows, network: &Network, cost: &GeneralizedCost) -> f64 {
    let mut z = 0.0;
    for (a, l) in network.links().iter().enumerate() {
        z += cost.vot * cost.bpr.integral(l.free_flow_time, l.capacity, link_flows.total[a]);
        for m in VehicleClass::ALL {
            z += cost.distance_cost(l, m) * link_flows.class(m)[a];
        }
    }
    z
}

/// Generalized cost of each path (link index sequences) for `class` at the
/// given flows, without capacity multipliers.
pub fn evaluate_path_costs(
    network: &Network,
    cost: &GeneralizedCost,
    link_flows: &LinkFlows,
    class: VehicleClass,
    paths: &[Vec<usize>],
) -> Vec<f64> {
    let links = network.links();
    paths
        .iter()
        .map(|p| p.iter().map(|&a| cost.link_cost(&links[a], link_flows.total[a], class)).sum())
        .collect()
}

/// Primal feasibility, dual feasibility and complementarity of the capacity
/// constraints of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub min_lambda: f64,
    /// Largest `max(0, x_a − c_a)`.
    pub max_capacity_violation: f64,
    /// Largest `|λ_a (c_a − x_a)| / c_a`.
    pub max_complementarity: f64,
}

pub fn kkt_report(solution: &EquilibriumSolution) -> KktReport {
    let mut r = KktReport {
        min_lambda: 0.0,
        max_capacity_violation: 0.0,
        max_complementarity: 0.0,
    };
    for d in &solution.duals {
        r.min_lambda = r.min_lambda.min(d.lambda);
        r.max_capacity_violation = r.max_capacity_violation.max(d.flow - d.capacity);
        r.max_complementarity = r
            .max_complementarity
            .max((d.lambda * (d.capacity - d.flow)).abs() / d.capacity);
    }
    r
}
