//! Penetration sweeps and the structural diagnostics computed on them.

mod detect;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use detect::{
    classify_curve, detect_plateaus, detect_transitions, gradient, CityClassification, CityType, Interval,
    DEFAULT_EPSILON, EARLY_RANGE_END, TRANSITION_FACTOR, TYPE_III_MAX_CHANGE,
};

use crate::cost::GeneralizedCost;
use crate::demand::{split_demand, OdMatrix, VehicleClass};
use crate::equilibrium::{solve_from, EquilibriumSolution, PathSet, SolverOptions};
use crate::error::{Error, Result};
use crate::metrics::{potential_savings, potential_savings_diff, MetricsReport, TravelTimeRule};
use crate::network::Network;

/// A path is active when it carries more than this fraction of its demand.
pub const ACTIVE_PATH_FRACTION: f64 = 1e-6;

/// Active paths (link index sequences, sorted) of one class on one OD pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub origin: String,
    pub destination: String,
    pub demand: f64,
    pub paths: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub penetration: f64,
    pub metrics: MetricsReport,
    /// Potential savings (%) against the sweep's max and min `T_MUE`.
    pub potential_savings: Option<f64>,
    /// Change of potential savings from the previous level.
    pub delta_ps: Option<f64>,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Path overlap ratio when both classes carry demand.
    pub path_overlap: Option<f64>,
    pub link_flows: Vec<f64>,
    /// Per class; `None` for solutions without paths.
    pub active_paths: Option<[Vec<ActiveSet>; 2]>,
}

impl LevelRecord {
    pub fn avg_travel_time(&self) -> f64 {
        self.metrics.avg_travel_time_mue
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub levels: Vec<f64>,
    pub records: Vec<LevelRecord>,
    /// `∂T/∂R_e` per interval between consecutive levels, min per unit.
    pub gradient: Vec<f64>,
    pub epsilon: f64,
    pub plateau_intervals: Vec<Interval>,
    pub transition_intervals: Vec<Interval>,
    /// `None` when the solutions carry no paths.
    pub critical_thresholds: Option<Vec<f64>>,
    /// `None` unless the levels span `[0, 1]` with at least five points.
    pub city_type: Option<CityClassification>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// Start each level from the previous level's path flows.
    pub warm_start: bool,
    pub epsilon: f64,
    pub time_rule: TravelTimeRule,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            warm_start: true,
            epsilon: DEFAULT_EPSILON,
            time_rule: TravelTimeRule::FlowWeighted,
        }
    }
}

/// Solves the equilibrium at every level with warm starts and runs the detectors.
pub fn run_sweep(
    network: &Network,
    od: &OdMatrix,
    cost: &GeneralizedCost,
    levels: &[f64],
    solver: &SolverOptions,
) -> Result<SweepResult> {
    let options = SweepOptions {
        solver: solver.clone(),
        ..Default::default()
    };
    run_sweep_with(network, od, cost, levels, &options)
}

pub fn run_sweep_with(
    network: &Network,
    od: &OdMatrix,
    cost: &GeneralizedCost,
    levels: &[f64],
    options: &SweepOptions,
) -> Result<SweepResult> {
    if levels.len() < 2 {
        return Err(Error::Domain("a sweep needs at least two levels".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) || levels.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Domain("levels must be strictly increasing within [0, 1]".into()));
    }
    let mut records = Vec::with_capacity(levels.len());
    let mut previous: Option<PathSet> = None;
    for &r in levels {
        let outcome = split_demand(od, r).and_then(|demand| {
            let warm = if options.warm_start { previous.as_ref() } else { None };
            let solution = solve_from(network, &demand, cost, &options.solver, warm)?;
            if !solution.converged {
                return Err(Error::Divergence(format!(
                    "no convergence in {} iterations (relative gap {:.3e})",
                    solution.iterations, solution.relative_gap
                )));
            }
            let metrics = MetricsReport::compute_with(&solution, network, &demand, options.time_rule)?;
            Ok((solution, metrics))
        });
        match outcome {
            Ok((solution, metrics)) => {
                records.push(level_record(r, &solution, metrics));
                previous = solution.paths;
            }
            Err(source) => {
                let completed = assemble(records, options.epsilon);
                return Err(Error::PartialSweep {
                    level: r,
                    completed: Box::new(completed),
                    source: Box::new(source),
                });
            }
        }
    }
    Ok(assemble(records, options.epsilon))
}

fn level_record(r: f64, solution: &EquilibriumSolution, metrics: MetricsReport) -> LevelRecord {
    let active_paths = solution.paths.as_ref().map(|p| {
        [0, 1].map(|m| {
            p.classes[m]
                .iter()
                .map(|s| {
                    let mut paths: Vec<Vec<usize>> =
                        s.active(ACTIVE_PATH_FRACTION).into_iter().map(|p| p.to_vec()).collect();
                    paths.sort();
                    ActiveSet {
                        origin: s.origin.clone(),
                        destination: s.destination.clone(),
                        demand: s.demand,
                        paths,
                    }
                })
                .collect()
        })
    });
    LevelRecord {
        penetration: r,
        metrics,
        potential_savings: None,
        delta_ps: None,
        relative_gap: solution.relative_gap,
        iterations: solution.iterations,
        converged: solution.converged,
        path_overlap: path_overlap_ratio(solution).ok(),
        link_flows: solution.link_flows.total.clone(),
        active_paths,
    }
}

/// Fills in the sweep-wide quantities from per-level records.
fn assemble(mut records: Vec<LevelRecord>, epsilon: f64) -> SweepResult {
    let levels: Vec<f64> = records.iter().map(|r| r.penetration).collect();
    let t: Vec<f64> = records.iter().map(|r| r.avg_travel_time()).collect();
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let ps: Vec<Option<f64>> = t.iter().map(|&x| potential_savings(x, t_max, t_min).ok()).collect();
    if ps.iter().all(Option::is_some) {
        let values: Vec<f64> = ps.iter().map(|p| p.unwrap()).collect();
        for (rec, d) in records.iter_mut().skip(1).zip(potential_savings_diff(&values)) {
            rec.delta_ps = Some(d);
        }
    }
    for (rec, p) in records.iter_mut().zip(ps) {
        rec.potential_savings = p;
    }

    let g = if levels.len() >= 2 {
        gradient(&levels, &t).unwrap_or_default()
    } else {
        Vec::new()
    };
    let plateau_intervals = detect_plateaus(&levels, &g, epsilon);
    let transition_intervals = detect_transitions(&levels, &g, epsilon);
    let city_type = if records.iter().all(|r| r.converged) {
        classify_curve(&levels, &t, epsilon).ok()
    } else {
        None
    };
    let mut sweep = SweepResult {
        levels,
        records,
        gradient: g,
        epsilon,
        plateau_intervals,
        transition_intervals,
        critical_thresholds: None,
        city_type,
    };
    sweep.critical_thresholds = critical_thresholds(&sweep).ok();
    sweep
}

impl SweepResult {
    pub fn avg_travel_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.avg_travel_time()).collect()
    }

    /// Re-runs the detectors with a different ε.
    pub fn with_epsilon(self, epsilon: f64) -> SweepResult {
        assemble(self.records, epsilon)
    }
}

/// Plateau intervals of a sweep for threshold `epsilon` (min per unit penetration).
pub fn sweep_plateaus(sweep: &SweepResult, epsilon: f64) -> Vec<Interval> {
    detect_plateaus(&sweep.levels, &sweep.gradient, epsilon)
}

pub fn sweep_transitions(sweep: &SweepResult, epsilon: f64) -> Vec<Interval> {
    detect_transitions(&sweep.levels, &sweep.gradient, epsilon)
}

/// Midpoints of the level brackets across which some (class, OD) active path
/// set changes. Pairs where the class has no demand at either end are skipped.
pub fn critical_thresholds(sweep: &SweepResult) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for w in sweep.records.windows(2) {
        let (Some(a), Some(b)) = (&w[0].active_paths, &w[1].active_paths) else {
            return Err(Error::Unsupported(
                "critical thresholds need path flows; use a solver that returns paths".into(),
            ));
        };
        let changed = (0..2).any(|m| {
            a[m].iter().zip(&b[m]).any(|(x, y)| x.demand > 0.0 && y.demand > 0.0 && x.paths != y.paths)
        });
        if changed {
            out.push(0.5 * (w[0].penetration + w[1].penetration));
        }
    }
    Ok(out)
}

/// Jaccard similarity of the GV and EV active path sets, pooled over OD pairs.
pub fn path_overlap_ratio(solution: &EquilibriumSolution) -> Result<f64> {
    let paths = solution.paths.as_ref().ok_or_else(|| {
        Error::Unsupported("path overlap needs path flows; use a solver that returns paths".into())
    })?;
    let active = |m: VehicleClass| -> BTreeSet<Vec<usize>> {
        paths
            .class(m)
            .iter()
            .flat_map(|s| s.active(ACTIVE_PATH_FRACTION))
            .map(|p| p.to_vec())
            .collect()
    };
    let (gv, ev) = (active(VehicleClass::Gv), active(VehicleClass::Ev));
    if gv.is_empty() || ev.is_empty() {
        return Err(Error::Undefined("path overlap with a class carrying no flow".into()));
    }
    Ok(jaccard(&gv, &ev))
}

/// `|A ∩ B| / |A ∪ B|`.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Classifies the sweep's city type; refuses sweeps with unconverged levels.
pub fn classify_city(sweep: &SweepResult) -> Result<CityClassification> {
    if let Some(r) = sweep.records.iter().find(|r| !r.converged) {
        return Err(Error::Domain(format!(
            "level {} did not converge; classification refused",
            r.penetration
        )));
    }
    classify_curve(&sweep.levels, &sweep.avg_travel_times(), sweep.epsilon)
}

/// One CSV row per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub penetration: f64,
    pub t_mue: f64,
    pub ps: Option<f64>,
    pub delta_ps: Option<f64>,
    pub voc_total: f64,
    pub rur: f64,
    pub t_ff: f64,
    pub relative_gap: f64,
    pub converged: bool,
}

/// JSON summary of a sweep: per-level scalars, intervals, thresholds, ρ and
/// the city type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub levels: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub path_overlap: Vec<Option<f64>>,
    pub gradient: Vec<f64>,
    pub epsilon: f64,
    pub plateau_intervals: Vec<Interval>,
    pub transition_intervals: Vec<Interval>,
    pub critical_thresholds: Option<Vec<f64>>,
    pub city_type: Option<CityClassification>,
}

/// A `penetration,value` series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub penetration: f64,
    pub value: f64,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.records
            .iter()
            .map(|r| SweepRow {
                penetration: r.penetration,
                t_mue: r.metrics.avg_travel_time_mue,
                ps: r.potential_savings,
                delta_ps: r.delta_ps,
                voc_total: r.metrics.voc_total,
                rur: r.metrics.rur,
                t_ff: r.metrics.avg_travel_time_ff,
                relative_gap: r.relative_gap,
                converged: r.converged,
            })
            .collect()
    }

    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            levels: self.levels.clone(),
            rows: self.rows(),
            path_overlap: self.records.iter().map(|r| r.path_overlap).collect(),
            gradient: self.gradient.clone(),
            epsilon: self.epsilon,
            plateau_intervals: self.plateau_intervals.clone(),
            transition_intervals: self.transition_intervals.clone(),
            critical_thresholds: self.critical_thresholds.clone(),
            city_type: self.city_type.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.summary())?;
        Ok(())
    }

    /// Writes `series_t.csv`, `series_ps.csv`, `series_voc_total.csv` and
    /// `series_rur.csv` into `dir`.
    pub fn write_series(&self, dir: &Path) -> Result<()> {
        let rows = self.rows();
        let series: [(&str, Box<dyn Fn(&SweepRow) -> Option<f64>>); 4] = [
            ("series_t.csv", Box::new(|r| Some(r.t_mue))),
            ("series_ps.csv", Box::new(|r| r.ps)),
            ("series_voc_total.csv", Box::new(|r| Some(r.voc_total))),
            ("series_rur.csv", Box::new(|r| Some(r.rur))),
        ];
        for (name, f) in series {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            for r in &rows {
                if let Some(value) = f(r) {
                    w.serialize(SeriesPoint {
                        penetration: r.penetration,
                        value,
                    })?;
                }
            }
            w.flush()?;
        }
        Ok(())
    }
}

pub fn read_sweep_csv<R: std::io::Read>(reader: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Schema {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_examples() {
        let s = |v: &[u8]| v.iter().copied().collect::<BTreeSet<u8>>();
        assert!((jaccard(&s(&[1, 2]), &s(&[2, 3])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[1, 2])), 1.0);
        assert_eq!(jaccard(&s(&[1]), &s(&[2])), 0.0);
    }
}
