//! Brute-force references for the budgeted shortest-path code: exhaustive walk
//! enumeration and Bellman-Ford on small random graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chaincost::{chain_cost, recurrence_value, TransitionGraph};
use crate::error::Result;

pub const ORACLE_NODES: usize = 6;
pub const ORACLE_MAX_EDGES: usize = 6;

#[derive(Clone, Debug, Serialize)]
pub struct OracleInstance {
    pub seed: u64,
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub budget: f64,
}

/// Random graph on [`ORACLE_NODES`] nodes: each ordered pair (self-loops
/// included) carries an edge with probability one half, weight in `[0, 1)`.
/// Odd seeds use budget 1, even seeds are unbounded.
pub fn random_instance(seed: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adjacency = (0..ORACLE_NODES)
        .map(|_| {
            (0..ORACLE_NODES)
                .filter_map(|q| rng.random_bool(0.5).then(|| (q, rng.random::<f64>())))
                .collect()
        })
        .collect();
    let budget = if seed % 2 == 1 { 1.0 } else { f64::INFINITY };
    OracleInstance { seed, adjacency, budget }
}

/// Cheapest walk with `1..=max_edges` edges from `source` to every node,
/// by enumerating all of them. Costs above `budget` become infinite.
pub fn enumerate_walks(adj: &[Vec<(usize, f64)>], source: usize, max_edges: usize, budget: f64) -> Vec<f64> {
    fn go(adj: &[Vec<(usize, f64)>], at: usize, cost: f64, left: usize, best: &mut [f64]) {
        if left == 0 {
            return;
        }
        for &(q, w) in &adj[at] {
            let c = cost + w;
            if c < best[q] {
                best[q] = c;
            }
            go(adj, q, c, left - 1, best);
        }
    }
    let mut best = vec![f64::INFINITY; adj.len()];
    go(adj, source, 0.0, max_edges, &mut best);
    truncate(best, budget)
}

/// Bellman-Ford with walks of at least one edge.
pub fn bellman_ford(adj: &[Vec<(usize, f64)>], source: usize, budget: f64) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    for &(q, w) in &adj[source] {
        dist[q] = dist[q].min(w);
    }
    for _ in 0..n {
        let mut changed = false;
        for p in 0..n {
            if dist[p] == f64::INFINITY {
                continue;
            }
            for &(q, w) in &adj[p] {
                if dist[p] + w < dist[q] {
                    dist[q] = dist[p] + w;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    truncate(dist, budget)
}

fn truncate(mut v: Vec<f64>, budget: f64) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x > budget {
            *x = f64::INFINITY;
        }
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct Mismatch {
    pub source: usize,
    pub target: usize,
    pub dijkstra: f64,
    pub enumeration: f64,
    pub bellman_ford: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleOutcome {
    pub seed: u64,
    pub pass: bool,
    pub edges: usize,
    /// Edge whose weight was altered before the Dijkstra run, if any.
    pub injected: Option<(usize, usize)>,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub passed: usize,
    pub failing_seeds: Vec<u64>,
    pub outcomes: Vec<OracleOutcome>,
}

impl OracleSummary {
    pub fn all_pass(&self) -> bool {
        self.passed == self.instances
    }
}

/// Compare the graph code against both references on one instance. With
/// `inject`, the cheapest out-edge of node 0 is made 0.5 heavier in the copy
/// handed to Dijkstra, which must then be caught.
pub fn check_instance(inst: &OracleInstance, inject: bool) -> Result<OracleOutcome> {
    let mut adj = inst.adjacency.clone();
    let mut injected = None;
    if inject {
        if let Some(e) = (0..adj[0].len()).min_by(|&a, &b| adj[0][a].1.total_cmp(&adj[0][b].1)) {
            adj[0][e].1 += 0.5;
            injected = Some((0, adj[0][e].0));
        }
    }
    let graph = TransitionGraph::from_adjacency(&adj, inst.budget)?;
    let mut mismatches = Vec::new();
    for s in 0..ORACLE_NODES {
        let table = chain_cost(&graph, s);
        let en = enumerate_walks(&inst.adjacency, s, ORACLE_MAX_EDGES, inst.budget);
        let bf = bellman_ford(&inst.adjacency, s, inst.budget);
        let cycle = recurrence_value(&graph, s);
        for q in 0..ORACLE_NODES {
            let d = table.get(q);
            if d != en[q] || d != bf[q] || (q == s && cycle != en[q]) {
                mismatches.push(Mismatch { source: s, target: q, dijkstra: d, enumeration: en[q], bellman_ford: bf[q] });
            }
        }
    }
    Ok(OracleOutcome {
        seed: inst.seed,
        pass: mismatches.is_empty(),
        edges: inst.adjacency.iter().map(Vec::len).sum(),
        injected,
        mismatches,
    })
}

/// Run `count` instances with seeds `base_seed..base_seed + count`.
pub fn run_oracle_suite(count: usize, base_seed: u64, inject: bool) -> Result<OracleSummary> {
    let outcomes = (0..count as u64)
        .map(|k| check_instance(&random_instance(base_seed + k), inject))
        .collect::<Result<Vec<_>>>()?;
    let failing_seeds: Vec<u64> = outcomes.iter().filter(|o| !o.pass).map(|o| o.seed).collect();
    Ok(OracleSummary { instances: count, passed: count - failing_seeds.len(), failing_seeds, outcomes })
}
