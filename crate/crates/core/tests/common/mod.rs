//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mue::cost::GeneralizedCost;
use mue::demand::{ClassDemand, VehicleClass};
use mue::network::Network;

/// Euclidean projection onto `{x >= 0, sum x = total}` by bisection on the
/// KKT threshold `tau` in `x_i = max(0, v_i - tau)`.
pub fn simplex_oracle(v: &[f64], total: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|&x| (x - tau).max(0.0)).sum::<f64>();
    let hi0 = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (hi0 - total - 1.0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// All simple paths (as link-index sequences) from `from` to `to`.
pub fn simple_paths(net: &Network, from: usize, to: usize) -> Vec<Vec<usize>> {
    fn dfs(net: &Network, node: usize, to: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == to {
            out.push(path.clone());
            return;
        }
        for &l in net.outgoing(node) {
            let next = net.links()[l].to;
            if seen[next] {
                continue;
            }
            seen[next] = true;
            path.push(l);
            dfs(net, next, to, seen, path, out);
            path.pop();
            seen[next] = false;
        }
    }
    let mut seen = vec![false; net.node_count()];
    seen[from] = true;
    let mut out = Vec::new();
    dfs(net, from, to, &mut seen, &mut Vec::new(), &mut out);
    out
}

struct Bundle {
    class: usize,
    /// demand in units of 0.001 veh/h
    units: i64,
    paths: Vec<Vec<usize>>,
}

/// Brute-force minimiser of the Beckmann-type objective over path flows.
///
/// Works on a lattice of 0.001 veh/h. Each bundle's simplex is searched
/// exhaustively around the incumbent, block by block, on successively finer
/// grids (10, 1, 0.1, 0.01, 0.001 veh/h).
pub struct GridOracle<'a> {
    net: &'a Network,
    cost: GeneralizedCost,
    bundles: Vec<Bundle>,
}

const UNIT: f64 = 1e-3;

impl<'a> GridOracle<'a> {
    pub fn new(net: &'a Network, demand: &ClassDemand, cost: GeneralizedCost) -> Self {
        let mut bundles = Vec::new();
        for m in VehicleClass::ALL {
            for (k, (o, d)) in demand.pairs().iter().enumerate() {
                let q = demand.demand(m)[k];
                if q <= 0.0 {
                    continue;
                }
                let from = net.zone(o).unwrap().access_node();
                let to = net.zone(d).unwrap().access_node();
                bundles.push(Bundle {
                    class: m.index(),
                    units: (q / UNIT).round() as i64,
                    paths: simple_paths(net, from, to),
                });
            }
        }
        Self { net, cost, bundles }
    }

    fn objective(&self, flows: &[Vec<i64>]) -> f64 {
        let links = self.net.links();
        let mut x = vec![0.0; links.len()];
        let mut distance = 0.0;
        for (b, f) in self.bundles.iter().zip(flows) {
            for (p, &u) in b.paths.iter().zip(f) {
                let v = u as f64 * UNIT;
                for &l in p {
                    x[l] += v;
                    distance += v * self.cost.per_km[b.class] * links[l].length;
                }
            }
        }
        let (a, beta) = (self.cost.bpr.alpha, self.cost.bpr.beta);
        let time: f64 = links
            .iter()
            .zip(&x)
            .map(|(l, &x)| {
                let c = l.capacity;
                l.free_flow_time * (x + a * c / (beta + 1.0) * (x / c).powf(beta + 1.0))
            })
            .sum();
        self.cost.vot * time + distance
    }

    /// Lattice points of bundle `b` with every free coordinate within
    /// `radius` steps of `center`.
    fn candidates(&self, b: usize, center: &[i64], step: i64, radius: i64) -> Vec<Vec<i64>> {
        let total = self.bundles[b].units;
        let n = center.len();
        let mut out = Vec::new();
        let mut cur = vec![0i64; n];
        fn rec(i: usize, n: usize, used: i64, total: i64, center: &[i64], step: i64, radius: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if i == n - 1 {
                cur[i] = total - used;
                out.push(cur.clone());
                return;
            }
            for j in -radius..=radius {
                let v = center[i] + j * step;
                if v < 0 || used + v > total {
                    continue;
                }
                cur[i] = v;
                rec(i + 1, n, used + v, total, center, step, radius, cur, out);
            }
        }
        rec(0, n, 0, total, center, step, radius, &mut cur, &mut out);
        out
    }

    /// Aggregate link flows at the best lattice point found.
    pub fn solve(&self) -> Vec<f64> {
        let mut flows: Vec<Vec<i64>> = self
            .bundles
            .iter()
            .map(|b| {
                let mut f = vec![0; b.paths.len()];
                f[0] = b.units;
                f
            })
            .collect();
        let mut best = self.objective(&flows);
        for (step, radius) in [(10_000, 20), (1_000, 15), (100, 15), (10, 15), (1, 15)] {
            for _ in 0..500 {
                let mut improved = false;
                for b in 0..self.bundles.len() {
                    let center = flows[b].clone();
                    for cand in self.candidates(b, &center, step, radius) {
                        let old = std::mem::replace(&mut flows[b], cand);
                        let v = self.objective(&flows);
                        if v < best - 1e-12 * best.abs() {
                            best = v;
                            improved = true;
                        } else {
                            flows[b] = old;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        let mut x = vec![0.0; self.net.link_count()];
        for (b, f) in self.bundles.iter().zip(&flows) {
            for (p, &u) in b.paths.iter().zip(f) {
                for &l in p {
                    x[l] += u as f64 * UNIT;
                }
            }
        }
        x
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `‖a − b‖∞ / max(‖a‖∞, 1)`
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().map(|x| x.abs()).fold(1.0, f64::max);
    max_abs_diff(a, b) / scale
}
