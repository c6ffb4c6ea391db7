//! Path-based solvers: projected primal-dual gradient and extra-gradient,
//! both over working path sets grown by column generation.

use super::instance::{finish, initial_state, path_cost, wardrop_gap, Instance, PathState};
use super::simplex::project_in_place;
use super::{EquilibriumSolution, IterationRecord, Method, PathSet, SolverOptions};
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 20;
/// Safety factor on `1/L` for the extra-gradient step.
const EG_SAFETY: f64 = 0.9;

/// Path flows laid out like the bundles of a [`PathState`].
type Flows = [Vec<Vec<f64>>; 2];

fn flows_of(state: &PathState) -> Flows {
    [0, 1].map(|m| state.sets[m].iter().map(|b| b.flows.clone()).collect())
}

fn set_flows(state: &mut PathState, flows: Flows) {
    for (m, per_od) in flows.into_iter().enumerate() {
        for (b, f) in state.sets[m].iter_mut().zip(per_od) {
            b.flows = f;
        }
    }
}

fn link_totals(inst: &Instance, state: &PathState, flows: &Flows) -> Vec<f64> {
    let mut x = vec![0.0; inst.link_count()];
    for m in 0..2 {
        for (b, f) in state.sets[m].iter().zip(&flows[m]) {
            for (p, &v) in b.paths.iter().zip(f) {
                if v != 0.0 {
                    for &a in p {
                        x[a] += v;
                    }
                }
            }
        }
    }
    x
}

/// Path costs under effective link costs.
fn path_costs(state: &PathState, costs: &[Vec<f64>; 2]) -> Flows {
    [0, 1].map(|m| {
        state.sets[m]
            .iter()
            .map(|b| b.paths.iter().map(|p| path_cost(p, &costs[m])).collect())
            .collect()
    })
}

/// Largest sum of `γ t'_a` along any working path: a diagonal bound on the
/// Lipschitz constant of the path cost map.
fn lipschitz_estimate(inst: &Instance, state: &PathState, x: &[f64]) -> f64 {
    let slopes = inst.link_slopes(x);
    let vot = inst.cost.vot;
    let mut l: f64 = 0.0;
    for m in 0..2 {
        for b in &state.sets[m] {
            for p in &b.paths {
                l = l.max(p.iter().map(|&a| vot * slopes[a]).sum());
            }
        }
    }
    l
}

/// `f ← P(f − step · c)` per (class, OD).
fn projected_step(inst: &Instance, base: &Flows, costs: &Flows, step: f64) -> Flows {
    [0, 1].map(|m| {
        base[m]
            .iter()
            .zip(&costs[m])
            .enumerate()
            .map(|(k, (f, c))| {
                let mut v: Vec<f64> = f.iter().zip(c).map(|(f, c)| f - step * c).collect();
                if !v.is_empty() {
                    project_in_place(&mut v, inst.demand[m][k]);
                }
                v
            })
            .collect()
    })
}

fn dual_step(inst: &Instance, lambda: &[f64], x: &[f64], step: f64) -> Vec<f64> {
    inst.constraints
        .iter()
        .zip(lambda)
        .map(|(&(a, c), l)| (l + step * (x[a] - c)).max(0.0))
        .collect()
}

fn sq_diff(a: &Flows, b: &Flows) -> f64 {
    let mut s = 0.0;
    for m in 0..2 {
        for (u, v) in a[m].iter().zip(&b[m]) {
            for (p, q) in u.iter().zip(v) {
                s += (p - q) * (p - q);
            }
        }
    }
    s
}

fn sq_diff_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn lagrangian(inst: &Instance, state: &PathState, flows: &Flows, lambda: &[f64]) -> f64 {
    let mut per_class = [vec![0.0; inst.link_count()], vec![0.0; inst.link_count()]];
    for m in 0..2 {
        for (b, f) in state.sets[m].iter().zip(&flows[m]) {
            for (p, &v) in b.paths.iter().zip(f) {
                for &a in p {
                    per_class[m][a] += v;
                }
            }
        }
    }
    let [gv, ev] = per_class;
    let lf = super::LinkFlows::from_classes(gv, ev);
    inst.objective(&lf) + inst.constraint_term(&lf.total, lambda)
}

fn check_dual_bound(lambda: &[f64], bound: f64) -> Result<()> {
    let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
    if norm > bound || !norm.is_finite() {
        return Err(Error::DualUnbounded { bound });
    }
    Ok(())
}

fn has_demand(inst: &Instance) -> bool {
    inst.demand.iter().flatten().any(|&d| d > 0.0)
}

/// One step of the shared outer loop: effective costs, column generation,
/// gap. Returns (x, gap, Lagrangian).
fn evaluate(inst: &Instance, state: &mut PathState, lambda: &[f64], it: usize) -> Result<(Vec<f64>, f64, f64)> {
    let x = state.link_flows(inst.link_count());
    let costs = inst.link_costs(&x.total, lambda);
    let sp = inst.shortest_paths(&costs)?;
    let gap = wardrop_gap(inst, state, &costs, &sp);
    let obj = inst.objective(&x) + inst.constraint_term(&x.total, lambda);
    if !obj.is_finite() {
        return Err(Error::Divergence(format!("objective {obj} at iteration {it}")));
    }
    state.add_columns(&sp);
    Ok((x.total, gap, obj))
}

pub(crate) fn run_primal_dual(
    inst: &Instance,
    options: &SolverOptions,
    warm: Option<&PathSet>,
) -> Result<EquilibriumSolution> {
    let mut state = initial_state(inst, options.init, warm)?;
    let mut lambda = vec![0.0; inst.constraints.len()];
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    if !has_demand(inst) {
        return finish(inst, Method::PrimalDual, state, &lambda, trace, 0, true);
    }

    for it in 0..=options.max_iters {
        iterations = it;
        let (x, gap, obj) = evaluate(inst, &mut state, &lambda, it)?;
        if last_change < options.change_tol && gap <= options.rel_gap_tol {
            converged = true;
            trace.push(record(it, gap, obj, 0.0, Some(last_change), None));
            break;
        }
        if it == options.max_iters {
            trace.push(record(it, gap, obj, 0.0, Some(last_change), None));
            break;
        }

        let costs = path_costs(&state, &inst.link_costs(&x, &lambda));
        let l = lipschitz_estimate(inst, &state, &x);
        let mut warning = None;
        let mut alpha = match options.primal_step {
            Some(a) => {
                if l > 0.0 && a > 1.0 / l {
                    warning = Some(format!("primal step {a} exceeds 1/L estimate {:.3e}", 1.0 / l));
                }
                a
            }
            None if l > 0.0 => 1.0 / l,
            // all-constant costs: any step reaches the projection fixed point
            None => 1.0,
        };
        let old = flows_of(&state);
        let mut new = projected_step(inst, &old, &costs, alpha);
        for _ in 0..MAX_HALVINGS {
            if lagrangian(inst, &state, &new, &lambda) <= obj {
                break;
            }
            alpha *= 0.5;
            new = projected_step(inst, &old, &costs, alpha);
        }
        let x_new = link_totals(inst, &state, &new);
        let lambda_new = dual_step(inst, &lambda, &x_new, options.dual_step);
        check_dual_bound(&lambda_new, options.dual_bound)?;

        last_change = sq_diff(&new, &old) + sq_diff_vec(&lambda_new, &lambda);
        trace.push(record(it, gap, obj, alpha, Some(last_change), warning));
        set_flows(&mut state, new);
        lambda = lambda_new;
        state.prune(inst);
    }
    finish(inst, Method::PrimalDual, state, &lambda, trace, iterations, converged)
}

pub(crate) fn run_extra_gradient(
    inst: &Instance,
    options: &SolverOptions,
    warm: Option<&PathSet>,
) -> Result<EquilibriumSolution> {
    let mut state = initial_state(inst, options.init, warm)?;
    let mut lambda = vec![0.0; inst.constraints.len()];
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    if !has_demand(inst) {
        return finish(inst, Method::ExtraGradient, state, &lambda, trace, 0, true);
    }
    // the dual block adds the coupling through A, whose norm is at least 1
    let coupling = if inst.constraints.is_empty() { 0.0 } else { 1.0 };

    for it in 0..=options.max_iters {
        iterations = it;
        let (x, gap, obj) = evaluate(inst, &mut state, &lambda, it)?;
        if last_change < options.change_tol && gap <= options.rel_gap_tol {
            converged = true;
            trace.push(record(it, gap, obj, 0.0, Some(last_change), None));
            break;
        }
        if it == options.max_iters {
            trace.push(record(it, gap, obj, 0.0, Some(last_change), None));
            break;
        }

        let costs = path_costs(&state, &inst.link_costs(&x, &lambda));
        let l = lipschitz_estimate(inst, &state, &x) + coupling;
        let mut warning = None;
        let mut tau = match options.eg_step {
            Some(t) => {
                if l > 0.0 && t >= 1.0 / l {
                    warning = Some(format!("step {t} is not below 1/L estimate {:.3e}", 1.0 / l));
                }
                t
            }
            None if l > 0.0 => EG_SAFETY / l,
            None => 1.0,
        };
        let old = flows_of(&state);

        // extrapolation, shrinking τ until the local secant bound holds
        let (mut half, mut half_lambda, mut half_x, mut half_costs);
        let mut halvings = 0;
        loop {
            half = projected_step(inst, &old, &costs, tau);
            half_x = link_totals(inst, &state, &half);
            half_lambda = dual_step(inst, &lambda, &x, tau);
            half_costs = path_costs(&state, &inst.link_costs(&half_x, &half_lambda));
            let dz = sq_diff(&half, &old) + sq_diff_vec(&half_lambda, &lambda);
            let dual_old: Vec<f64> = inst.constraints.iter().map(|&(a, c)| c - x[a]).collect();
            let dual_half: Vec<f64> = inst.constraints.iter().map(|&(a, c)| c - half_x[a]).collect();
            let dcost = sq_diff(&half_costs, &costs) + sq_diff_vec(&dual_half, &dual_old);
            if dz == 0.0 || tau * dcost.sqrt() <= EG_SAFETY * dz.sqrt() || halvings == MAX_HALVINGS {
                break;
            }
            tau *= 0.5;
            halvings += 1;
        }

        let new = projected_step(inst, &old, &half_costs, tau);
        let lambda_new = dual_step(inst, &lambda, &half_x, tau);
        check_dual_bound(&lambda_new, options.dual_bound)?;

        last_change = sq_diff(&new, &old) + sq_diff_vec(&lambda_new, &lambda);
        trace.push(record(it, gap, obj, tau, Some(last_change), warning));
        set_flows(&mut state, new);
        lambda = lambda_new;
        state.prune(inst);
    }
    finish(inst, Method::ExtraGradient, state, &lambda, trace, iterations, converged)
}

fn record(
    iteration: usize,
    gap: f64,
    objective: f64,
    step: f64,
    change: Option<f64>,
    warning: Option<String>,
) -> IterationRecord {
    IterationRecord {
        iteration,
        relative_gap: gap,
        objective,
        step,
        change: change.filter(|c| c.is_finite()),
        warning,
    }
}
