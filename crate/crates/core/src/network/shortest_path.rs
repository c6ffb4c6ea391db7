use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Network;
use crate::error::{Error, Result};

/// Costs within this distance are treated as ties.
const TIE_EPS: f64 = 1e-12;

/// One-to-all shortest path tree. Unreachable nodes have infinite cost and
/// no predecessor.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    pub origin: usize,
    pub cost: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPathTree {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.cost[node].is_finite()
    }

    /// Link sequence from the origin to `dest`; empty when `dest` is the origin.
    pub fn path_to(&self, network: &Network, dest: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(dest) {
            return None;
        }
        let mut links = Vec::new();
        let mut node = dest;
        while let Some(l) = self.pred[node] {
            links.push(l);
            node = network.links()[l].from;
        }
        links.reverse();
        Some(links)
    }
}

#[derive(Copy, Clone)]
struct Entry {
    cost: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on cost, then node index
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

/// Exact one-to-all shortest paths (Dijkstra) under `link_costs`.
///
/// Among predecessors whose labels tie within 1e-12, the smallest link index
/// wins, so trees are identical across runs and platforms.
pub fn shortest_path(network: &Network, link_costs: &[f64], origin: usize) -> Result<ShortestPathTree> {
    if link_costs.len() != network.link_count() {
        return Err(Error::Contract(format!(
            "cost vector has {} entries for {} links",
            link_costs.len(),
            network.link_count()
        )));
    }
    if origin >= network.node_count() {
        return Err(Error::Contract(format!("origin index {origin} out of range")));
    }
    if let Some((i, c)) = link_costs.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Contract(format!("link {} has invalid cost {c}", network.links()[i].id)));
    }
    Ok(dijkstra(network, link_costs, origin))
}

pub(crate) fn dijkstra(network: &Network, link_costs: &[f64], origin: usize) -> ShortestPathTree {
    let n = network.node_count();
    let links = network.links();
    let mut cost = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[origin] = 0.0;
    heap.push(Entry { cost: 0.0, node: origin });
    while let Some(Entry { cost: c, node: u }) = heap.pop() {
        if done[u] || c > cost[u] {
            continue;
        }
        done[u] = true;
        for &l in network.outgoing(u) {
            let v = links[l].to;
            if v == origin {
                continue;
            }
            let w = link_costs[l];
            let nc = c + w;
            if nc < cost[v] - TIE_EPS {
                cost[v] = nc;
                pred[v] = Some(l);
                if !done[v] {
                    heap.push(Entry { cost: nc, node: v });
                }
            } else if nc <= cost[v] + TIE_EPS && w > 0.0 && pred[v].is_some_and(|p| l < p) {
                // tie: keep the label, prefer the smaller link index
                pred[v] = Some(l);
                if nc < cost[v] {
                    cost[v] = nc;
                    if !done[v] {
                        heap.push(Entry { cost: nc, node: v });
                    }
                }
            }
        }
    }
    ShortestPathTree { origin, cost, pred }
}
