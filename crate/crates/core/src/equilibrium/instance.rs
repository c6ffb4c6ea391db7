//! Solver-internal problem representation shared by all methods.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{
    EquilibriumSolution, Initialization, IterationRecord, LinkDual, LinkFlows, Method, OdCost, OdPaths,
    PathFlow, PathSet, SolverOptions, PATH_DROP_FRACTION,
};
use crate::cost::GeneralizedCost;
use crate::demand::{ClassDemand, VehicleClass};
use crate::error::{Error, Result};
use crate::network::{shortest_path::dijkstra, Network};

/// Extra shortest-path rounds used to seed uniform initial path sets.
const UNIFORM_SEED_ROUNDS: usize = 3;

pub(crate) struct OdPair {
    pub origin: usize,
    pub dest: usize,
    pub origin_zone: String,
    pub dest_zone: String,
}

struct OriginGroup {
    class: usize,
    origin: usize,
    ods: Vec<usize>,
}

pub(crate) struct Instance<'a> {
    pub net: &'a Network,
    pub cost: GeneralizedCost,
    pub ods: Vec<OdPair>,
    /// class × od
    pub demand: [Vec<f64>; 2],
    /// class × link, `C_m · l_a`
    pub dist_cost: [Vec<f64>; 2],
    /// (link index, capacity)
    pub constraints: Vec<(usize, f64)>,
    pub skipped_intrazonal: f64,
    pub penetration: f64,
    groups: Vec<OriginGroup>,
    pool: Option<rayon::ThreadPool>,
}

/// Shortest path of one class for one OD pair.
pub(crate) struct SpResult {
    pub path: Vec<usize>,
    pub cost: f64,
}

/// Shortest paths per class per OD; `None` where the class has no demand.
pub(crate) type AllShortest = [Vec<Option<SpResult>>; 2];

impl<'a> Instance<'a> {
    pub fn new(
        net: &'a Network,
        demand: &ClassDemand,
        cost: &GeneralizedCost,
        options: &SolverOptions,
    ) -> Result<Self> {
        let mut ods = Vec::new();
        let mut dem = [Vec::new(), Vec::new()];
        let mut skipped = 0.0;
        for (i, (o, d)) in demand.pairs().iter().enumerate() {
            let zone = |id: &str| {
                net.zone(id)
                    .ok_or_else(|| Error::Referential(format!("OD pair references unknown zone {id}")))
            };
            let (oz, dz) = (zone(o)?, zone(d)?);
            if oz.access_node() == dz.access_node() {
                skipped += demand.pair_total(i);
                continue;
            }
            ods.push(OdPair {
                origin: oz.access_node(),
                dest: dz.access_node(),
                origin_zone: o.clone(),
                dest_zone: d.clone(),
            });
            for m in VehicleClass::ALL {
                dem[m.index()].push(demand.demand(m)[i]);
            }
        }
        let mut groups = Vec::new();
        for m in 0..2 {
            let mut by_origin: Vec<(usize, Vec<usize>)> = Vec::new();
            let mut pos: HashMap<usize, usize> = HashMap::new();
            for (k, od) in ods.iter().enumerate() {
                if dem[m][k] <= 0.0 {
                    continue;
                }
                let slot = *pos.entry(od.origin).or_insert_with(|| {
                    by_origin.push((od.origin, Vec::new()));
                    by_origin.len() - 1
                });
                by_origin[slot].1.push(k);
            }
            groups.extend(by_origin.into_iter().map(|(origin, ods)| OriginGroup { class: m, origin, ods }));
        }
        let dist_cost = [VehicleClass::Gv, VehicleClass::Ev]
            .map(|m| net.links().iter().map(|l| cost.distance_cost(l, m)).collect());
        let mut constraints = Vec::with_capacity(options.capacity_constraints.len());
        for c in &options.capacity_constraints {
            let idx = net
                .link_idx(&c.link_id)
                .ok_or_else(|| Error::Referential(format!("capacity constraint on unknown link {}", c.link_id)))?;
            constraints.push((idx, c.capacity));
        }
        let pool = if options.threads > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(options.threads)
                    .build()
                    .map_err(|e| Error::Validation(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            net,
            cost: *cost,
            ods,
            demand: dem,
            dist_cost,
            constraints,
            skipped_intrazonal: skipped,
            penetration: demand.penetration(),
            groups,
            pool,
        })
    }

    pub fn link_count(&self) -> usize {
        self.net.link_count()
    }

    /// Travel time of every link at aggregate flows `x`.
    pub fn link_times(&self, x: &[f64]) -> Vec<f64> {
        let bpr = self.cost.bpr;
        self.net.links().iter().zip(x).map(|(l, &f)| bpr.link_time(l, f)).collect()
    }

    /// `t'_a(x_a)` for every link.
    pub fn link_slopes(&self, x: &[f64]) -> Vec<f64> {
        let bpr = self.cost.bpr;
        self.net
            .links()
            .iter()
            .zip(x)
            .map(|(l, &f)| bpr.derivative(l.free_flow_time, l.capacity, f))
            .collect()
    }

    /// Effective generalized link costs per class: `γ t_a(x_a) + C_m l_a + λ_a`.
    pub fn link_costs(&self, x: &[f64], lambda: &[f64]) -> [Vec<f64>; 2] {
        let times = self.link_times(x);
        let mut base: Vec<f64> = times.iter().map(|t| self.cost.vot * t).collect();
        for (&(a, _), &l) in self.constraints.iter().zip(lambda) {
            base[a] += l;
        }
        [0, 1].map(|m| base.iter().zip(&self.dist_cost[m]).map(|(b, d)| b + d).collect())
    }

    /// Beckmann objective of class link flows.
    pub fn objective(&self, flows: &LinkFlows) -> f64 {
        let bpr = self.cost.bpr;
        let mut z = 0.0;
        for (a, l) in self.net.links().iter().enumerate() {
            z += self.cost.vot * bpr.integral(l.free_flow_time, l.capacity, flows.total[a]);
            z += self.dist_cost[0][a] * flows.per_class[0][a] + self.dist_cost[1][a] * flows.per_class[1][a];
        }
        z
    }

    /// `Σ λ_a (x_a − c_a)`.
    pub fn constraint_term(&self, x: &[f64], lambda: &[f64]) -> f64 {
        self.constraints.iter().zip(lambda).map(|(&(a, c), l)| l * (x[a] - c)).sum()
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    /// Shortest paths for every (class, OD) with positive demand.
    pub fn shortest_paths(&self, costs: &[Vec<f64>; 2]) -> Result<AllShortest> {
        let per_group: Vec<Vec<(usize, Option<SpResult>)>> = self.install(|| {
            self.groups
                .par_iter()
                .map(|g| {
                    let tree = dijkstra(self.net, &costs[g.class], g.origin);
                    g.ods
                        .iter()
                        .map(|&k| {
                            let dest = self.ods[k].dest;
                            let sp = tree.path_to(self.net, dest).map(|path| SpResult {
                                path,
                                cost: tree.cost[dest],
                            });
                            (k, sp)
                        })
                        .collect()
                })
                .collect()
        });
        let mut out: AllShortest = [
            (0..self.ods.len()).map(|_| None).collect(),
            (0..self.ods.len()).map(|_| None).collect(),
        ];
        let mut unreachable = Vec::new();
        for (g, results) in self.groups.iter().zip(per_group) {
            for (k, sp) in results {
                match sp {
                    Some(sp) => out[g.class][k] = Some(sp),
                    None => unreachable.push(k),
                }
            }
        }
        if !unreachable.is_empty() {
            unreachable.sort_unstable();
            unreachable.dedup();
            return Err(Error::Infeasible(
                unreachable
                    .into_iter()
                    .map(|k| (self.ods[k].origin_zone.clone(), self.ods[k].dest_zone.clone()))
                    .collect(),
            ));
        }
        Ok(out)
    }
}

/// Working paths of one (class, OD) with their flows.
#[derive(Clone, Debug, Default)]
pub(crate) struct Bundle {
    pub paths: Vec<Vec<usize>>,
    pub flows: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

impl Bundle {
    /// Index of `path`, appending it with zero flow when new.
    pub fn intern(&mut self, path: &[usize]) -> usize {
        if let Some(&i) = self.index.get(path) {
            return i;
        }
        let i = self.paths.len();
        self.paths.push(path.to_vec());
        self.flows.push(0.0);
        self.index.insert(path.to_vec(), i);
        i
    }

    /// Drops paths under `threshold`, moving their flow to the largest path.
    /// Returns the kept indices (in old numbering) when anything was removed.
    pub fn prune(&mut self, threshold: f64) -> Option<Vec<usize>> {
        if self.paths.len() <= 1 || self.flows.iter().all(|&f| f >= threshold) {
            return None;
        }
        let keep: Vec<usize> = (0..self.paths.len()).filter(|&i| self.flows[i] >= threshold).collect();
        let removed: f64 = (0..self.paths.len())
            .filter(|&i| self.flows[i] < threshold)
            .map(|i| self.flows[i])
            .sum();
        let keep = if keep.is_empty() {
            // every path is tiny: keep the largest
            let best = argmax(&self.flows);
            vec![best]
        } else {
            keep
        };
        let paths: Vec<Vec<usize>> = keep.iter().map(|&i| std::mem::take(&mut self.paths[i])).collect();
        let mut flows: Vec<f64> = keep.iter().map(|&i| self.flows[i]).collect();
        let kept_sum: f64 = flows.iter().sum();
        let best = argmax(&flows);
        flows[best] += removed + (self.flows.iter().sum::<f64>() - kept_sum - removed);
        self.index = paths.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        self.paths = paths;
        self.flows = flows;
        Some(keep)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Path flows of every (class, OD).
#[derive(Clone, Debug)]
pub(crate) struct PathState {
    pub sets: [Vec<Bundle>; 2],
}

impl PathState {
    pub fn empty(ods: usize) -> Self {
        Self {
            sets: [vec![Bundle::default(); ods], vec![Bundle::default(); ods]],
        }
    }

    pub fn link_flows(&self, link_count: usize) -> LinkFlows {
        let mut per_class = [vec![0.0; link_count], vec![0.0; link_count]];
        for m in 0..2 {
            for b in &self.sets[m] {
                for (p, &f) in b.paths.iter().zip(&b.flows) {
                    if f != 0.0 {
                        for &a in p {
                            per_class[m][a] += f;
                        }
                    }
                }
            }
        }
        let [gv, ev] = per_class;
        LinkFlows::from_classes(gv, ev)
    }

    /// Adds every shortest path to its working set.
    pub fn add_columns(&mut self, sp: &AllShortest) {
        for m in 0..2 {
            for (b, s) in self.sets[m].iter_mut().zip(&sp[m]) {
                if let Some(s) = s {
                    b.intern(&s.path);
                }
            }
        }
    }

    pub fn prune(&mut self, inst: &Instance) {
        for m in 0..2 {
            for (b, &d) in self.sets[m].iter_mut().zip(&inst.demand[m]) {
                if d > 0.0 {
                    b.prune(PATH_DROP_FRACTION * d);
                }
            }
        }
    }
}

/// Cost of a link sequence.
#[inline]
pub(crate) fn path_cost(path: &[usize], link_costs: &[f64]) -> f64 {
    path.iter().map(|&a| link_costs[a]).sum()
}

/// Relative Wardrop violation `(c̄ − μ)/μ` of every (class, OD) with demand,
/// and the maximum.
pub(crate) fn wardrop_gap(inst: &Instance, state: &PathState, costs: &[Vec<f64>; 2], sp: &AllShortest) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 0..2 {
        for (k, b) in state.sets[m].iter().enumerate() {
            let d = inst.demand[m][k];
            let Some(s) = &sp[m][k] else { continue };
            if d <= 0.0 {
                continue;
            }
            let mean = b
                .paths
                .iter()
                .zip(&b.flows)
                .map(|(p, f)| f * path_cost(p, &costs[m]))
                .sum::<f64>()
                / d;
            worst = worst.max(relative_violation(mean, s.cost));
        }
    }
    worst
}

pub(crate) fn relative_violation(mean: f64, shortest: f64) -> f64 {
    if shortest > 0.0 {
        ((mean - shortest) / shortest).max(0.0)
    } else {
        (mean - shortest).max(0.0)
    }
}

/// Builds the starting path flows.
pub(crate) fn initial_state(
    inst: &Instance,
    init: Initialization,
    warm: Option<&PathSet>,
) -> Result<PathState> {
    let zero_lambda = vec![0.0; inst.constraints.len()];
    let free = inst.link_costs(&vec![0.0; inst.link_count()], &zero_lambda);
    let sp = inst.shortest_paths(&free)?;
    let mut state = PathState::empty(inst.ods.len());
    state.add_columns(&sp);
    let assign_aon = |state: &mut PathState, m: usize, k: usize| {
        let d = inst.demand[m][k];
        if let Some(s) = &sp[m][k] {
            let i = state.sets[m][k].intern(&s.path);
            state.sets[m][k].flows[i] = d;
        }
    };
    match (warm, init) {
        (Some(ws), _) => {
            let lookup: [HashMap<(&str, &str), &OdPaths>; 2] = [0, 1].map(|m| {
                ws.classes[m]
                    .iter()
                    .map(|s| ((s.origin.as_str(), s.destination.as_str()), s))
                    .collect()
            });
            for m in 0..2 {
                for k in 0..inst.ods.len() {
                    let d = inst.demand[m][k];
                    if d <= 0.0 {
                        continue;
                    }
                    let key = (inst.ods[k].origin_zone.as_str(), inst.ods[k].dest_zone.as_str());
                    let source = [m, 1 - m]
                        .into_iter()
                        .filter_map(|c| lookup[c].get(&key))
                        .find(|s| s.paths.iter().map(|p| p.flow).sum::<f64>() > 0.0);
                    match source {
                        Some(s) => {
                            let total: f64 = s.paths.iter().map(|p| p.flow).sum();
                            let b = &mut state.sets[m][k];
                            b.flows.iter_mut().for_each(|f| *f = 0.0);
                            for p in &s.paths {
                                let i = b.intern(&p.links);
                                b.flows[i] += d * p.flow / total;
                            }
                        }
                        None => assign_aon(&mut state, m, k),
                    }
                }
            }
        }
        (None, Initialization::AllOrNothing) => {
            for m in 0..2 {
                for k in 0..inst.ods.len() {
                    assign_aon(&mut state, m, k);
                }
            }
        }
        (None, Initialization::Uniform) => {
            spread_uniformly(inst, &mut state);
            for _ in 0..UNIFORM_SEED_ROUNDS {
                let x = state.link_flows(inst.link_count());
                let costs = inst.link_costs(&x.total, &zero_lambda);
                let sp = inst.shortest_paths(&costs)?;
                state.add_columns(&sp);
                spread_uniformly(inst, &mut state);
            }
        }
    }
    Ok(state)
}

fn spread_uniformly(inst: &Instance, state: &mut PathState) {
    for m in 0..2 {
        for (b, &d) in state.sets[m].iter_mut().zip(&inst.demand[m]) {
            let n = b.paths.len();
            if n > 0 {
                b.flows.iter_mut().for_each(|f| *f = d / n as f64);
            }
        }
    }
}

/// Assembles the returned solution from final path flows and multipliers.
pub(crate) fn finish(
    inst: &Instance,
    method: Method,
    mut state: PathState,
    lambda: &[f64],
    gap_trace: Vec<IterationRecord>,
    iterations: usize,
    converged: bool,
) -> Result<EquilibriumSolution> {
    state.prune(inst);
    if !converged {
        log::warn!("{method:?} stopped after {iterations} iterations without reaching the gap tolerance");
    }
    let flows = state.link_flows(inst.link_count());
    let costs = inst.link_costs(&flows.total, lambda);
    let sp = inst.shortest_paths(&costs)?;
    let relative_gap = wardrop_gap(inst, &state, &costs, &sp);
    let beckmann_value = inst.objective(&flows);
    let link_times = inst.link_times(&flows.total);

    let mut od_costs = Vec::new();
    for m in VehicleClass::ALL {
        for (k, s) in sp[m.index()].iter().enumerate() {
            if let Some(s) = s {
                od_costs.push(OdCost {
                    class: m,
                    origin: inst.ods[k].origin_zone.clone(),
                    destination: inst.ods[k].dest_zone.clone(),
                    cost: s.cost,
                });
            }
        }
    }
    let links = inst.net.links();
    let duals: Vec<LinkDual> = inst
        .constraints
        .iter()
        .zip(lambda)
        .map(|(&(a, c), &l)| LinkDual {
            link_id: links[a].id.clone(),
            capacity: c,
            flow: flows.total[a],
            lambda: l,
        })
        .collect();
    let complementarity_residual = duals.iter().map(|d| (d.lambda * (d.capacity - d.flow)).abs()).sum();

    let classes = [0, 1].map(|m| {
        state.sets[m]
            .iter()
            .enumerate()
            .map(|(k, b)| OdPaths {
                origin: inst.ods[k].origin_zone.clone(),
                destination: inst.ods[k].dest_zone.clone(),
                demand: inst.demand[m][k],
                paths: b
                    .paths
                    .iter()
                    .zip(&b.flows)
                    .filter(|(_, &f)| f > 0.0)
                    .map(|(p, &f)| PathFlow {
                        links: p.clone(),
                        flow: f,
                    })
                    .collect(),
            })
            .collect()
    });

    Ok(EquilibriumSolution {
        method,
        penetration: inst.penetration,
        link_flows: flows,
        link_times,
        paths: Some(PathSet { classes }),
        duals,
        od_costs,
        gap_trace,
        relative_gap,
        beckmann_value,
        iterations,
        converged,
        complementarity_residual,
        skipped_intrazonal_demand: inst.skipped_intrazonal,
    })
}
