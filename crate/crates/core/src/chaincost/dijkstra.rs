//! Budget-bounded single-source shortest paths with the chain convention:
//! a chain has at least one step, so the value at the source is the cost of
//! the cheapest nontrivial cycle rather than zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TransitionGraph;
use crate::error::{Error, Result};

/// Largest node count accepted by [`full_cost_matrix`].
pub const FULL_MATRIX_GUARD: usize = 2048;

/// Discretized `L_T(source, ·)`; `f64::INFINITY` marks values beyond the budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCostTable {
    pub source: usize,
    pub values: Vec<f64>,
    pub budget: f64,
    pub t_min: Option<f64>,
}

impl ChainCostTable {
    #[inline]
    pub fn get(&self, q: usize) -> f64 {
        self.values[q]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap, we pop the smallest (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable scratch space for repeated searches on graphs of one size.
pub struct Workspace {
    dist: Vec<f64>,
    settled: Vec<bool>,
    touched: Vec<usize>,
    heap: BinaryHeap<Entry>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace { dist: vec![f64::INFINITY; n], settled: vec![false; n], touched: Vec::new(), heap: BinaryHeap::new() }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v] = f64::INFINITY;
            self.settled[v] = false;
        }
        self.touched.clear();
        self.heap.clear();
    }

    #[inline]
    fn offer(&mut self, v: usize, d: f64) {
        if d < self.dist[v] && !self.settled[v] {
            if self.dist[v] == f64::INFINITY {
                self.touched.push(v);
            }
            self.dist[v] = d;
            self.heap.push(Entry { dist: d, node: v });
        }
    }

    /// Run from the out-edges of `source`; stop early once `stop_at` is settled.
    fn run(&mut self, graph: &TransitionGraph, source: usize, budget: f64, stop_at: Option<usize>) {
        self.reset();
        for (q, w) in graph.edges(source) {
            if w <= budget {
                self.offer(q, w);
            }
        }
        while let Some(Entry { dist, node }) = self.heap.pop() {
            if self.settled[node] || dist > self.dist[node] {
                continue;
            }
            self.settled[node] = true;
            if stop_at == Some(node) {
                return;
            }
            for (q, w) in graph.edges(node) {
                let nd = dist + w;
                if nd <= budget {
                    self.offer(q, nd);
                }
            }
        }
    }
}

/// Nodes reachable from `source` by chains of total cost within `budget`,
/// with their costs, in settle order.
pub fn reachable_within(graph: &TransitionGraph, source: usize, budget: f64, ws: &mut Workspace) -> Vec<(usize, f64)> {
    ws.run(graph, source, budget.min(graph.budget()), None);
    ws.touched.iter().filter(|&&v| ws.settled[v]).map(|&v| (v, ws.dist[v])).collect()
}

fn effective_budget(graph: &TransitionGraph, budget: Option<f64>) -> f64 {
    budget.map_or(graph.budget(), |b| b.min(graph.budget()))
}

/// `L_T(source, ·)` on the graph, truncated at the graph budget.
pub fn chain_cost(graph: &TransitionGraph, source: usize) -> ChainCostTable {
    chain_cost_bounded(graph, source, None)
}

/// As [`chain_cost`], with an optional tighter budget.
pub fn chain_cost_bounded(graph: &TransitionGraph, source: usize, budget: Option<f64>) -> ChainCostTable {
    let budget = effective_budget(graph, budget);
    let n = graph.len();
    let values = if graph.edge_count() * 2 >= n * n {
        dense_search(graph, source, budget)
    } else {
        let mut ws = Workspace::new(n);
        ws.run(graph, source, budget, None);
        ws.dist
    };
    ChainCostTable { source, values, budget, t_min: graph.timegrid().map(|t| t.t_min()) }
}

/// Array-scan Dijkstra for graphs with close to `n²` edges. Visits nodes in
/// the same `(dist, index)` order as the heap version.
fn dense_search(graph: &TransitionGraph, source: usize, budget: f64) -> Vec<f64> {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    for (q, w) in graph.edges(source) {
        if w <= budget && w < dist[q] {
            dist[q] = w;
        }
    }
    loop {
        let mut best = f64::INFINITY;
        let mut u = usize::MAX;
        for (v, (&d, &s)) in dist.iter().zip(&settled).enumerate() {
            if !s && d < best {
                best = d;
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        settled[u] = true;
        for (q, w) in graph.edges(u) {
            let nd = best + w;
            if nd <= budget && nd < dist[q] && !settled[q] {
                dist[q] = nd;
            }
        }
    }
    dist
}

/// Cost of the cheapest nontrivial cycle through `p`, or infinity beyond the
/// budget. Runs one multi-source search seeded with `p`'s successors at
/// offsets equal to the edge weights, and stops as soon as `p` is settled.
pub fn recurrence_value(graph: &TransitionGraph, p: usize) -> f64 {
    let mut ws = Workspace::new(graph.len());
    recurrence_value_with(graph, p, &mut ws)
}

pub fn recurrence_value_with(graph: &TransitionGraph, p: usize, ws: &mut Workspace) -> f64 {
    ws.run(graph, p, graph.budget(), Some(p));
    if ws.settled[p] {
        ws.dist[p]
    } else {
        f64::INFINITY
    }
}

/// Recurrence values of every node.
pub fn recurrence_values(graph: &TransitionGraph) -> Vec<f64> {
    (0..graph.len())
        .into_par_iter()
        .map_init(|| Workspace::new(graph.len()), |ws, p| recurrence_value_with(graph, p, ws))
        .collect()
}

/// `chain_cost` from every node. Refuses graphs above [`FULL_MATRIX_GUARD`] nodes.
pub fn full_cost_matrix(graph: &TransitionGraph) -> Result<Vec<ChainCostTable>> {
    if graph.len() > FULL_MATRIX_GUARD {
        return Err(Error::Guard(format!(
            "full cost matrix requested for {} nodes; the limit is {FULL_MATRIX_GUARD}",
            graph.len()
        )));
    }
    Ok(sources_cost_tables(graph, &(0..graph.len()).collect::<Vec<_>>(), None))
}

/// `chain_cost` from each listed source, in parallel, results in source order.
pub fn sources_cost_tables(graph: &TransitionGraph, sources: &[usize], budget: Option<f64>) -> Vec<ChainCostTable> {
    sources.par_iter().map(|&s| chain_cost_bounded(graph, s, budget)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(adj: &[Vec<(usize, f64)>], budget: f64) -> TransitionGraph {
        TransitionGraph::from_adjacency(adj, budget).unwrap()
    }

    #[test]
    fn path_graph() {
        let g = graph(&[vec![(1, 0.1)], vec![(2, 0.2)], vec![]], 10.0);
        let t = chain_cost(&g, 0);
        assert!((t.get(2) - 0.3).abs() < 1e-15);
        assert_eq!(t.get(0), f64::INFINITY);
        assert_eq!(recurrence_value(&g, 0), f64::INFINITY);
    }

    #[test]
    fn source_value_is_shortest_cycle() {
        let g = graph(&[vec![(1, 0.25)], vec![(0, 0.5), (2, 0.125)], vec![(0, 0.125)]], 10.0);
        let t = chain_cost(&g, 0);
        assert_eq!(t.get(0), 0.5);
        assert_eq!(recurrence_value(&g, 0), 0.5);
        assert_eq!(recurrence_value(&g, 1), 0.5);
    }

    #[test]
    fn zero_self_loop() {
        let g = graph(&[vec![(0, 0.0), (1, 0.5)], vec![(1, 0.0)]], 1.0);
        assert_eq!(chain_cost(&g, 0).get(0), 0.0);
        assert_eq!(recurrence_value(&g, 1), 0.0);
    }

    #[test]
    fn budget_truncates() {
        let g = graph(&[vec![(1, 0.5)], vec![(2, 0.5)], vec![]], 0.75);
        let t = chain_cost(&g, 0);
        assert_eq!(t.get(1), 0.5);
        assert_eq!(t.get(2), f64::INFINITY);
        let t = chain_cost_bounded(&g, 0, Some(0.25));
        assert_eq!(t.get(1), f64::INFINITY);
    }

    #[test]
    fn dense_and_heap_agree() {
        let n = 7;
        let adj: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|p| (0..n).map(|q| (q, ((p * 7 + q * 3) % 5) as f64 * 0.1 + 0.05)).collect())
            .collect();
        let g = graph(&adj, 100.0);
        for s in 0..n {
            let dense = chain_cost(&g, s);
            let mut ws = Workspace::new(n);
            ws.run(&g, s, 100.0, None);
            assert_eq!(dense.values, ws.dist);
        }
    }

    #[test]
    fn guard() {
        let g = graph(&vec![vec![]; FULL_MATRIX_GUARD + 1], 1.0);
        assert!(matches!(full_cost_matrix(&g), Err(Error::Guard(_))));
    }

    #[test]
    fn symmetric_graph_gives_symmetric_matrix() {
        let w = [[0.0, 0.3, 0.7], [0.3, 0.0, 0.2], [0.7, 0.2, 0.0]];
        let adj: Vec<Vec<(usize, f64)>> = (0..3).map(|p| (0..3).map(|q| (q, w[p][q])).collect()).collect();
        let m = full_cost_matrix(&graph(&adj, 10.0)).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(m[p].get(q), m[q].get(p));
            }
        }
        assert_eq!(m[0].get(2), 0.5);
    }
}
