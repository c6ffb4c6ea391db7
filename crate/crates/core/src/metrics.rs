//! Congestion metrics over equilibrium solutions.
//!
//! Connector links are synthetic, so they are left out of VOC totals, road
//! utilization, delay factors and congested-time profiles.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demand::ClassDemand;
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::network::{shortest_path::dijkstra, Network};

/// Flows at or below this count as unused.
pub const USED_FLOW: f64 = 1e-9;

/// Default length bins (km) of the congested-time profile.
pub const DEFAULT_LENGTH_BINS: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, f64::INFINITY];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Travel times at the equilibrium flows.
    #[default]
    Mue,
    /// Free-flow times on each pair's fastest path.
    FreeFlow,
}

/// How an OD travel time is read off an equilibrium.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelTimeRule {
    /// Total vehicle time over total demand, `Σ x_a t_a / Σ q`: the
    /// flow-weighted mean time of the used paths.
    #[default]
    FlowWeighted,
    /// Time of each pair's fastest path at the equilibrium flows.
    MinTimePath,
}

/// Demand-weighted mean OD travel time in minutes.
pub fn avg_travel_time(
    solution: &EquilibriumSolution,
    network: &Network,
    demand: &ClassDemand,
    mode: TimeMode,
) -> Result<f64> {
    avg_travel_time_with(solution, network, demand, mode, TravelTimeRule::FlowWeighted)
}

pub fn avg_travel_time_with(
    solution: &EquilibriumSolution,
    network: &Network,
    demand: &ClassDemand,
    mode: TimeMode,
    rule: TravelTimeRule,
) -> Result<f64> {
    let pairs = routed_pairs(network, demand)?;
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    if total <= 0.0 {
        return Err(Error::Undefined("average travel time of zero demand".into()));
    }
    match (mode, rule) {
        (TimeMode::Mue, TravelTimeRule::FlowWeighted) => {
            let x = &solution.link_flows.total;
            Ok(x.iter().zip(&solution.link_times).map(|(x, t)| x * t).sum::<f64>() / total)
        }
        (TimeMode::Mue, TravelTimeRule::MinTimePath) => fastest_path_mean(network, &solution.link_times, &pairs, total),
        (TimeMode::FreeFlow, _) => {
            let t0: Vec<f64> = network.links().iter().map(|l| l.free_flow_time).collect();
            fastest_path_mean(network, &t0, &pairs, total)
        }
    }
}

/// (origin node, destination node, demand) of the pairs that are assigned.
fn routed_pairs(network: &Network, demand: &ClassDemand) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (i, (o, d)) in demand.pairs().iter().enumerate() {
        let node = |id: &str| {
            network
                .zone(id)
                .map(|z| z.access_node())
                .ok_or_else(|| Error::Referential(format!("unknown zone {id}")))
        };
        let (on, dn) = (node(o)?, node(d)?);
        let q = demand.pair_total(i);
        if on != dn && q > 0.0 {
            out.push((on, dn, q));
        }
    }
    Ok(out)
}

fn fastest_path_mean(network: &Network, times: &[f64], pairs: &[(usize, usize, f64)], total: f64) -> Result<f64> {
    let mut trees = HashMap::new();
    let mut sum = 0.0;
    for &(o, d, q) in pairs {
        let tree = trees.entry(o).or_insert_with(|| dijkstra(network, times, o));
        let t = tree.cost[d];
        if !t.is_finite() {
            return Err(Error::Infeasible(vec![(network.nodes()[o].id.clone(), network.nodes()[d].id.clone())]));
        }
        sum += q * t;
    }
    Ok(sum / total)
}

/// Absolute (minutes) and relative (percent) change of average travel time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    pub delta_t_abs: f64,
    pub delta_t_rel: f64,
}

pub fn compare(t_base: f64, t_scenario: f64) -> Result<TimeChange> {
    if t_base <= 0.0 || !t_base.is_finite() {
        return Err(Error::Undefined(format!("relative change against baseline {t_base}")));
    }
    let delta_t_abs = t_scenario - t_base;
    Ok(TimeChange {
        delta_t_abs,
        delta_t_rel: 100.0 * delta_t_abs / t_base,
    })
}

/// `100 (t_max − t) / (t_max − t_min)`, not clamped.
pub fn potential_savings(t_at_re: f64, t_max: f64, t_min: f64) -> Result<f64> {
    if t_max == t_min {
        return Err(Error::Undefined("potential savings with t_max = t_min".into()));
    }
    Ok(100.0 * (t_max - t_at_re) / (t_max - t_min))
}

/// `PS(R_j) − PS(R_i)` for consecutive levels (positive = improvement).
pub fn potential_savings_diff(ps: &[f64]) -> Vec<f64> {
    ps.windows(2).map(|w| w[1] - w[0]).collect()
}

/// A value attached to a link id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkValue {
    pub link_id: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Voc {
    /// `x_a / c_a` for every link, connectors included.
    pub per_link: Vec<f64>,
    /// Sum over non-connector links.
    pub total: f64,
}

pub fn voc(solution: &EquilibriumSolution, network: &Network) -> Voc {
    let per_link: Vec<f64> = network
        .links()
        .iter()
        .zip(&solution.link_flows.total)
        .map(|(l, x)| x / l.capacity)
        .collect();
    let total = network
        .links()
        .iter()
        .zip(&per_link)
        .filter(|(l, _)| !l.is_connector())
        .map(|(_, v)| v)
        .sum();
    Voc { per_link, total }
}

/// Share of non-connector links carrying flow above [`USED_FLOW`].
pub fn road_utilization(solution: &EquilibriumSolution, network: &Network) -> f64 {
    let mut roads = 0usize;
    let mut used = 0usize;
    for (l, &x) in network.links().iter().zip(&solution.link_flows.total) {
        if !l.is_connector() {
            roads += 1;
            if x > USED_FLOW {
                used += 1;
            }
        }
    }
    if roads == 0 {
        0.0
    } else {
        used as f64 / roads as f64
    }
}

/// `t_a / t_a^0` for every non-connector link.
pub fn delay_factors(solution: &EquilibriumSolution, network: &Network) -> Vec<LinkValue> {
    network
        .links()
        .iter()
        .zip(&solution.link_times)
        .filter(|(l, _)| !l.is_connector())
        .map(|(l, t)| LinkValue {
            link_id: l.id.clone(),
            value: t / l.free_flow_time,
        })
        .collect()
}

/// `DF(scenario) − DF(base)` matched by link id, in base order.
pub fn delay_factor_diff(base: &[LinkValue], scenario: &[LinkValue]) -> Result<Vec<LinkValue>> {
    let scen: HashMap<&str, f64> = scenario.iter().map(|v| (v.link_id.as_str(), v.value)).collect();
    let base_ids: BTreeSet<&str> = base.iter().map(|v| v.link_id.as_str()).collect();
    let scen_ids: BTreeSet<&str> = scen.keys().copied().collect();
    if base_ids != scen_ids {
        return Err(Error::LinkSetMismatch {
            only_in_base: base_ids.difference(&scen_ids).map(|s| s.to_string()).collect(),
            only_in_scenario: scen_ids.difference(&base_ids).map(|s| s.to_string()).collect(),
        });
    }
    Ok(base
        .iter()
        .map(|v| LinkValue {
            link_id: v.link_id.clone(),
            value: scen[v.link_id.as_str()] - v.value,
        })
        .collect())
}

/// Links in one length bin `[lower, upper)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub lower: f64,
    /// `null` in JSON for the open-ended last bin.
    #[serde(with = "open_upper")]
    pub upper: f64,
    pub links: usize,
    /// Mean congested time of the bin's links; `None` for an empty bin.
    pub mean_time: Option<f64>,
    pub mean_free_flow_time: Option<f64>,
}

/// Mean congested link time per length bin (unweighted by flow).
mod open_upper {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn link_congested_time_profile(
    solution: &EquilibriumSolution,
    network: &Network,
    bins: &[f64],
) -> Result<Vec<ProfileBin>> {
    if bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("bin edges must be strictly increasing with at least two edges".into()));
    }
    let mut acc = vec![(0usize, 0.0, 0.0); bins.len() - 1];
    for (l, &t) in network.links().iter().zip(&solution.link_times) {
        if l.is_connector() {
            continue;
        }
        if let Some(i) = bins.windows(2).position(|w| l.length >= w[0] && l.length < w[1]) {
            acc[i].0 += 1;
            acc[i].1 += t;
            acc[i].2 += l.free_flow_time;
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(i, (n, t, t0))| ProfileBin {
            lower: bins[i],
            upper: bins[i + 1],
            links: n,
            mean_time: (n > 0).then(|| t / n as f64),
            mean_free_flow_time: (n > 0).then(|| t0 / n as f64),
        })
        .collect())
}

/// Per-link metrics row (non-connector links).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub link_id: String,
    pub length_km: f64,
    pub flow: f64,
    pub voc: f64,
    /// congested time, minutes
    pub time: f64,
    pub delay_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub penetration: f64,
    pub avg_travel_time_mue: f64,
    pub avg_travel_time_ff: f64,
    pub voc_total: f64,
    pub rur: f64,
    pub connectors_excluded: usize,
    pub skipped_intrazonal_demand: f64,
    pub congested_time_profile: Vec<ProfileBin>,
    pub links: Vec<LinkMetrics>,
}

/// Scalar part of a [`MetricsReport`], one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub penetration: f64,
    pub avg_travel_time_mue: f64,
    pub avg_travel_time_ff: f64,
    pub voc_total: f64,
    pub rur: f64,
    pub connectors_excluded: usize,
    pub skipped_intrazonal_demand: f64,
}

impl MetricsReport {
    pub fn compute(solution: &EquilibriumSolution, network: &Network, demand: &ClassDemand) -> Result<Self> {
        Self::compute_with(solution, network, demand, TravelTimeRule::FlowWeighted)
    }

    pub fn compute_with(
        solution: &EquilibriumSolution,
        network: &Network,
        demand: &ClassDemand,
        rule: TravelTimeRule,
    ) -> Result<Self> {
        let v = voc(solution, network);
        let links = network
            .links()
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_connector())
            .map(|(a, l)| LinkMetrics {
                link_id: l.id.clone(),
                length_km: l.length,
                flow: solution.link_flows.total[a],
                voc: v.per_link[a],
                time: solution.link_times[a],
                delay_factor: solution.link_times[a] / l.free_flow_time,
            })
            .collect();
        Ok(Self {
            penetration: solution.penetration,
            avg_travel_time_mue: avg_travel_time_with(solution, network, demand, TimeMode::Mue, rule)?,
            avg_travel_time_ff: avg_travel_time(solution, network, demand, TimeMode::FreeFlow)?,
            voc_total: v.total,
            rur: road_utilization(solution, network),
            connectors_excluded: network.links().iter().filter(|l| l.is_connector()).count(),
            skipped_intrazonal_demand: solution.skipped_intrazonal_demand,
            congested_time_profile: link_congested_time_profile(solution, network, &DEFAULT_LENGTH_BINS)?,
            links,
        })
    }

    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            penetration: self.penetration,
            avg_travel_time_mue: self.avg_travel_time_mue,
            avg_travel_time_ff: self.avg_travel_time_ff,
            voc_total: self.voc_total,
            rur: self.rur,
            connectors_excluded: self.connectors_excluded,
            skipped_intrazonal_demand: self.skipped_intrazonal_demand,
        }
    }

    pub fn delay_factors(&self) -> Vec<LinkValue> {
        self.links
            .iter()
            .map(|l| LinkValue {
                link_id: l.link_id.clone(),
                value: l.delay_factor,
            })
            .collect()
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// One row per non-connector link.
    pub fn write_links_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for l in &self.links {
            w.serialize(l)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One summary row.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.serialize(self.summary())?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub delta_t_abs: f64,
    /// percent
    pub delta_t_rel: f64,
    pub delta_delay_factor: Vec<LinkValue>,
}

impl ComparisonReport {
    pub fn new(base: &MetricsReport, scenario: &MetricsReport) -> Result<Self> {
        let c = compare(base.avg_travel_time_mue, scenario.avg_travel_time_mue)?;
        Ok(Self {
            delta_t_abs: c.delta_t_abs,
            delta_t_rel: c.delta_t_rel,
            delta_delay_factor: delay_factor_diff(&base.delay_factors(), &scenario.delay_factors())?,
        })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round(x: f64, places: i32) -> f64 {
        let s = 10f64.powi(places);
        (x * s).round() / s
    }

    #[test]
    fn compare_table_rows() {
        let c = compare(25.1, 24.53).unwrap();
        assert_eq!((round(c.delta_t_abs, 2), round(c.delta_t_rel, 2)), (-0.57, -2.27));
        let c = compare(40.53, 36.77).unwrap();
        assert_eq!((round(c.delta_t_abs, 2), round(c.delta_t_rel, 2)), (-3.76, -9.28));
        let c = compare(7.0, 7.0).unwrap();
        assert_eq!((c.delta_t_abs, c.delta_t_rel), (0.0, 0.0));
        assert!(compare(0.0, 1.0).is_err());
    }

    #[test]
    fn savings() {
        assert_eq!(potential_savings(15.0, 20.0, 10.0).unwrap(), 50.0);
        assert_eq!(potential_savings(10.0, 20.0, 10.0).unwrap(), 100.0);
        assert_eq!(potential_savings(20.0, 20.0, 10.0).unwrap(), 0.0);
        assert!(potential_savings(21.0, 20.0, 10.0).unwrap() < 0.0);
        assert!(potential_savings(1.0, 2.0, 2.0).is_err());
        assert_eq!(potential_savings_diff(&[0.0, 50.0, 100.0]), vec![50.0, 50.0]);
        assert_eq!(potential_savings_diff(&[3.0, 3.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn delay_factor_diff_by_id() {
        let v = |id: &str, value| LinkValue {
            link_id: id.into(),
            value,
        };
        let d = delay_factor_diff(&[v("a", 1.5), v("b", 1.0)], &[v("b", 1.0), v("a", 1.2)]).unwrap();
        assert_eq!(d[0].link_id, "a");
        assert!((d[0].value + 0.3).abs() < 1e-12);
        match delay_factor_diff(&[v("a", 1.0)], &[v("c", 1.0)]) {
            Err(Error::LinkSetMismatch {
                only_in_base,
                only_in_scenario,
            }) => {
                assert_eq!(only_in_base, vec!["a"]);
                assert_eq!(only_in_scenario, vec!["c"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
