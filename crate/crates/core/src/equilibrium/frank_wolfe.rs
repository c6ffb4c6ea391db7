//! Link-based Frank-Wolfe and bi-conjugate Frank-Wolfe.
//!
//! Search directions are kept as path-flow targets per (class, OD) so the
//! returned solution carries a path decomposition like the path-based
//! solvers do.

use super::instance::{finish, initial_state, wardrop_gap, Instance, PathState};
use super::{EquilibriumSolution, IterationRecord, LinkFlows, Method, PathSet, SolverOptions};
use crate::error::{Error, Result};

const LINE_SEARCH_ITERS: usize = 60;
const LINE_SEARCH_TOL: f64 = 1e-10;
const CONJUGACY_EPS: f64 = 1e-12;
/// Upper clamp on the conjugate FW weight of the previous direction.
const CFW_MAX_WEIGHT: f64 = 0.99;

/// A feasible point used as a search target: path flows plus link flows.
#[derive(Clone)]
struct Target {
    /// class × OD × path, possibly shorter than the bundle (missing = 0)
    paths: [Vec<Vec<f64>>; 2],
    flows: LinkFlows,
}

impl Target {
    fn combine(parts: &[(f64, &Target)], link_count: usize) -> Target {
        let mut paths: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        let mut per_class = [vec![0.0; link_count], vec![0.0; link_count]];
        for m in 0..2 {
            let ods = parts[0].1.paths[m].len();
            paths[m] = (0..ods)
                .map(|k| {
                    let len = parts.iter().map(|(_, t)| t.paths[m][k].len()).max().unwrap_or(0);
                    let mut v = vec![0.0; len];
                    for (w, t) in parts {
                        for (slot, f) in v.iter_mut().zip(&t.paths[m][k]) {
                            *slot += w * f;
                        }
                    }
                    v
                })
                .collect();
            for (w, t) in parts {
                for (slot, f) in per_class[m].iter_mut().zip(&t.flows.per_class[m]) {
                    *slot += w * f;
                }
            }
        }
        let [gv, ev] = per_class;
        Target {
            paths,
            flows: LinkFlows::from_classes(gv, ev),
        }
    }
}

pub(crate) fn run(inst: &Instance, options: &SolverOptions, warm: Option<&PathSet>) -> Result<EquilibriumSolution> {
    if !inst.constraints.is_empty() {
        return Err(Error::Unsupported(
            "capacity constraints need a path-based method (primal_dual or extra_gradient)".into(),
        ));
    }
    let bfw = options.method == Method::Bfw;
    let n = inst.link_count();
    let no_lambda: [f64; 0] = [];
    let mut state = initial_state(inst, options.init, warm)?;
    let mut trace = Vec::new();
    // most recent first
    let mut history: Vec<Target> = Vec::new();
    let mut prev_theta = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..=options.max_iters {
        let x = state.link_flows(n);
        let costs = inst.link_costs(&x.total, &no_lambda);
        let sp = inst.shortest_paths(&costs)?;
        let gap = wardrop_gap(inst, &state, &costs, &sp);
        let objective = inst.objective(&x);
        if !objective.is_finite() {
            return Err(Error::Divergence(format!("objective {objective} at iteration {it}")));
        }
        iterations = it;
        if gap <= options.rel_gap_tol {
            converged = true;
            trace.push(record(it, gap, objective, 0.0, None));
            break;
        }
        if it == options.max_iters {
            trace.push(record(it, gap, objective, 0.0, None));
            break;
        }

        state.add_columns(&sp);
        let y = aon_target(inst, &state, &sp, n);
        let slopes = inst.link_slopes(&x.total);
        let h = |u: &[f64], v: &[f64]| -> f64 {
            slopes.iter().zip(u).zip(v).map(|((s, a), b)| inst.cost.vot * s * a * b).sum()
        };

        let mut warning = None;
        let s = if bfw && !history.is_empty() {
            match conjugate(&y, &history, prev_theta, &x, &h, n) {
                Some(s) if directional_derivative(&costs, &s.flows, &x) < 0.0 => s,
                Some(_) => {
                    warning = Some("conjugate direction not descent; plain FW step".to_string());
                    y
                }
                None => y,
            }
        } else {
            y
        };

        let theta = line_search(inst, &x, &s.flows);
        trace.push(record(it, gap, objective, theta, warning));

        for m in 0..2 {
            for (b, t) in state.sets[m].iter_mut().zip(&s.paths[m]) {
                for (i, f) in b.flows.iter_mut().enumerate() {
                    *f = (1.0 - theta) * *f + theta * t.get(i).copied().unwrap_or(0.0);
                }
            }
        }
        history.insert(0, s);
        history.truncate(2);
        prev_theta = theta;
    }

    let method = if bfw { Method::Bfw } else { Method::Fw };
    finish(inst, method, state, &no_lambda, trace, iterations, converged)
}

fn record(iteration: usize, gap: f64, objective: f64, step: f64, warning: Option<String>) -> IterationRecord {
    IterationRecord {
        iteration,
        relative_gap: gap,
        objective,
        step,
        change: None,
        warning,
    }
}

/// All demand of each (class, OD) on its current shortest path.
fn aon_target(inst: &Instance, state: &PathState, sp: &super::instance::AllShortest, n: usize) -> Target {
    let mut per_class = [vec![0.0; n], vec![0.0; n]];
    let paths = [0, 1].map(|m| {
        state.sets[m]
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut v = vec![0.0; b.paths.len()];
                if let Some(s) = &sp[m][k] {
                    let d = inst.demand[m][k];
                    let i = b
                        .paths
                        .iter()
                        .position(|p| *p == s.path)
                        .expect("shortest path interned before building target");
                    v[i] = d;
                    for &a in &s.path {
                        per_class[m][a] += d;
                    }
                }
                v
            })
            .collect()
    });
    let [gv, ev] = per_class;
    Target {
        paths,
        flows: LinkFlows::from_classes(gv, ev),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Conjugate target from the AON target `y` and up to two earlier targets.
/// `None` asks for a plain FW step.
fn conjugate(
    y: &Target,
    history: &[Target],
    prev_theta: f64,
    x: &LinkFlows,
    h: &dyn Fn(&[f64], &[f64]) -> f64,
    n: usize,
) -> Option<Target> {
    let yx = sub(&y.flows.total, &x.total);
    let s1 = &history[0];
    if history.len() == 1 || prev_theta >= 1.0 - CONJUGACY_EPS {
        if prev_theta >= 1.0 - CONJUGACY_EPS {
            return None;
        }
        // conjugate Frank-Wolfe with one previous direction
        let d1 = sub(&s1.flows.total, &x.total);
        let num = h(&d1, &yx);
        let den = h(&d1, &sub(&y.flows.total, &s1.flows.total));
        if den.abs() <= CONJUGACY_EPS {
            return None;
        }
        let a = (num / den).clamp(0.0, CFW_MAX_WEIGHT);
        return Some(Target::combine(&[(1.0 - a, y), (a, s1)], n));
    }
    let s2 = &history[1];
    let dbar = sub(&s1.flows.total, &x.total);
    let dbarbar: Vec<f64> = s1
        .flows
        .total
        .iter()
        .zip(&s2.flows.total)
        .zip(&x.total)
        .map(|((a, b), c)| prev_theta * a + (1.0 - prev_theta) * b - c)
        .collect();
    let mu_den = h(&dbarbar, &sub(&s2.flows.total, &s1.flows.total));
    let nu_den = h(&dbar, &dbar);
    if mu_den.abs() <= CONJUGACY_EPS || nu_den.abs() <= CONJUGACY_EPS {
        return None;
    }
    let mu = (-h(&dbarbar, &yx) / mu_den).max(0.0);
    let nu = (-h(&dbar, &yx) / nu_den + mu * prev_theta / (1.0 - prev_theta)).max(0.0);
    let b0 = 1.0 / (1.0 + mu + nu);
    Some(Target::combine(&[(b0, y), (nu * b0, s1), (mu * b0, s2)], n))
}

/// `∇Φ(x) · (s − x)` with class link costs as the gradient.
fn directional_derivative(costs: &[Vec<f64>; 2], s: &LinkFlows, x: &LinkFlows) -> f64 {
    (0..2)
        .map(|m| {
            costs[m]
                .iter()
                .zip(&s.per_class[m])
                .zip(&x.per_class[m])
                .map(|((c, a), b)| c * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Exact minimiser of Φ on `x + θ (s − x)`, θ ∈ [0, 1], by bisection on the
/// derivative.
fn line_search(inst: &Instance, x: &LinkFlows, s: &LinkFlows) -> f64 {
    let links = inst.net.links();
    let bpr = inst.cost.bpr;
    let d: Vec<f64> = sub(&s.total, &x.total);
    let constant: f64 = (0..2)
        .map(|m| {
            inst.dist_cost[m]
                .iter()
                .zip(&s.per_class[m])
                .zip(&x.per_class[m])
                .map(|((c, a), b)| c * (a - b))
                .sum::<f64>()
        })
        .sum();
    let slope = |theta: f64| -> f64 {
        let mut g = constant;
        for (a, l) in links.iter().enumerate() {
            if d[a] != 0.0 {
                let flow = (x.total[a] + theta * d[a]).max(0.0);
                g += inst.cost.vot * bpr.time(l.free_flow_time, l.capacity, flow) * d[a];
            }
        }
        g
    };
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..LINE_SEARCH_ITERS {
        if hi - lo < LINE_SEARCH_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
