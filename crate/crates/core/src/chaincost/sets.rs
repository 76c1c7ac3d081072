use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::dijkstra::recurrence_values;
use super::{GraphStats, TransitionGraph};
use crate::error::{Error, Result};
use crate::flow::FlowImageTable;
use crate::space::SampleGrid;

/// Recurrence values, membership bitmaps and component labels of one run.
#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceReport {
    pub t_values: Vec<f64>,
    /// `recurrence[k][p]` is `r_T(p)` for `T = t_values[k]`.
    pub recurrence: Vec<Vec<f64>>,
    pub a_t: Vec<Vec<bool>>,
    pub scr: Vec<bool>,
    pub cr: Vec<bool>,
    /// Minimal flow time of the graph used for the CR estimate.
    pub cr_t: f64,
    /// Per-sample label, `-1` outside SCR.
    pub components: Vec<i64>,
    pub epsilon: f64,
    pub epsilon_component: f64,
    pub budget: f64,
    pub graph_stats: Vec<GraphStats>,
    pub warnings: Vec<String>,
}

impl RecurrenceReport {
    pub fn scr_count(&self) -> usize {
        self.scr.iter().filter(|&&b| b).count()
    }

    pub fn cr_count(&self) -> usize {
        self.cr.iter().filter(|&&b| b).count()
    }

    pub fn component_count(&self) -> usize {
        component_count(&self.components)
    }
}

pub fn a_t_from_values(values: &[f64], eps: f64) -> Vec<bool> {
    values.iter().map(|&r| r <= eps).collect()
}

/// Samples whose cheapest nontrivial cycle costs at most `eps`.
pub fn a_t_set(graph: &TransitionGraph, eps: f64) -> Vec<bool> {
    a_t_from_values(&recurrence_values(graph), eps)
}

/// Elementwise AND of equally long bitmaps.
pub fn intersect(sets: &[Vec<bool>]) -> Vec<bool> {
    let Some(first) = sets.first() else { return Vec::new() };
    (0..first.len()).map(|p| sets.iter().all(|s| s[p])).collect()
}

/// Intersection of the `A_T` estimates over the given graphs.
pub fn scr_estimate(graphs: &[TransitionGraph], eps: &[f64]) -> Result<Vec<bool>> {
    if graphs.len() != eps.len() {
        return Err(Error::Config("one threshold per graph is required".into()));
    }
    let mut ts: Vec<f64> = graphs.iter().filter_map(|g| g.timegrid().map(|t| t.t_min())).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let all_timed = graphs.iter().all(|g| g.timegrid().is_some());
    if graphs.len() < 2 || (all_timed && ts.len() < 2) {
        return Err(Error::Config("the SCR estimate needs at least two distinct T values".into()));
    }
    let sets: Vec<Vec<bool>> = graphs.iter().zip(eps).map(|(g, &e)| a_t_set(g, e)).collect();
    Ok(intersect(&sets))
}

/// Samples lying on a cycle of the subgraph of edges with weight `<= eps`.
pub fn cr_estimate(graph: &TransitionGraph, eps: f64) -> Vec<bool> {
    let n = graph.len();
    let adj: Vec<Vec<u32>> = (0..n)
        .map(|p| graph.edges(p).filter(|e| e.1 <= eps).map(|e| e.0 as u32).collect())
        .collect();
    let comp = strongly_connected_components(&adj);
    let mut size = vec![0usize; n];
    for &c in &comp {
        size[c] += 1;
    }
    (0..n)
        .map(|p| size[comp[p]] > 1 || graph.weight(p, p).is_some_and(|w| w <= eps))
        .collect()
}

/// Tarjan's algorithm without recursion. Labels are numbered by the
/// smallest node index of each component.
pub fn strongly_connected_components(adj: &[Vec<u32>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));
        while let Some(&(v, pos)) = call.last() {
            if pos < adj[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = adj[v][pos] as usize;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    relabel(&comp)
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let k = map.len();
            *map.entry(l).or_insert(k)
        })
        .collect()
}

/// Strong chain transitive components among the SCR samples.
///
/// For each graph, SCR samples are joined `p → q` by every single jump of
/// weight `<= eps`; the strongly connected components of that digraph are
/// intersected across graphs. With `eps` below the sample spacing only
/// snapping error is tolerated per jump, so a sum threshold would wrongly
/// split flows whose images never land exactly on samples. Samples outside
/// SCR get `-1`.
pub fn transitive_components(graphs: &[TransitionGraph], scr: &[bool], eps: f64) -> Vec<i64> {
    let nodes: Vec<usize> = (0..scr.len()).filter(|&p| scr[p]).collect();
    let mut pos = vec![u32::MAX; scr.len()];
    for (i, &p) in nodes.iter().enumerate() {
        pos[p] = i as u32;
    }
    let per_graph: Vec<Vec<usize>> = graphs
        .iter()
        .map(|g| {
            let adj: Vec<Vec<u32>> = nodes
                .par_iter()
                .map(|&p| {
                    g.edges(p)
                        .filter(|&(q, w)| w <= eps && pos[q] != u32::MAX)
                        .map(|(q, _)| pos[q])
                        .collect()
                })
                .collect();
            strongly_connected_components(&adj)
        })
        .collect();
    let mut labels = vec![-1i64; scr.len()];
    let mut ids: HashMap<Vec<usize>, i64> = HashMap::new();
    for (i, &p) in nodes.iter().enumerate() {
        let key: Vec<usize> = per_graph.iter().map(|c| c[i]).collect();
        let next = ids.len() as i64;
        labels[p] = *ids.entry(key).or_insert(next);
    }
    labels
}

/// Number of distinct nonnegative labels.
pub fn component_count(labels: &[i64]) -> usize {
    labels.iter().filter(|&&l| l >= 0).max().map_or(0, |&m| m as usize + 1)
}

/// Warn when the flow moves too little over one step for the grid to tell
/// strong chains from ordinary ones. The moving region is the set of samples
/// whose speed is at least a tenth of the largest speed.
pub fn resolution_warning(
    grid: &SampleGrid,
    table: &FlowImageTable,
    speeds: &[f64],
    t: f64,
    eps: f64,
) -> Result<Option<String>> {
    let k = table.require_time(t)?;
    let vmax = speeds.iter().cloned().fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(None);
    }
    let min_disp = (0..grid.len())
        .filter(|&p| speeds[p] >= 0.1 * vmax)
        .map(|p| grid.space().dist(grid.point(p), table.image(p, k)))
        .fold(f64::INFINITY, f64::min);
    Ok((min_disp <= 2.0 * eps).then(|| {
        format!(
            "minimal one-step displacement {min_disp:.4e} at T = {t} is within 2ε = {:.4e}; \
             CR/SCR separation may be unresolved",
            2.0 * eps
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tarjan_basic() {
        // 0 <-> 1, 1 -> 2, 2 <-> 3, 4 alone
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2], vec![]];
        let c = strongly_connected_components(&adj);
        assert_eq!(c[0], c[1]);
        assert_eq!(c[2], c[3]);
        assert_ne!(c[0], c[2]);
        assert_ne!(c[4], c[0]);
        assert_eq!(c, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn tarjan_long_cycle_no_recursion() {
        let n = 200_000;
        let adj: Vec<Vec<u32>> = (0..n).map(|p| vec![((p + 1) % n) as u32]).collect();
        assert!(strongly_connected_components(&adj).iter().all(|&c| c == 0));
    }

    #[test]
    fn cr_needs_cycle() {
        let g = TransitionGraph::from_adjacency(
            &[vec![(1, 0.1)], vec![(0, 0.1)], vec![(0, 0.1)], vec![(3, 0.05)], vec![(4, 0.5)]],
            1.0,
        )
        .unwrap();
        assert_eq!(cr_estimate(&g, 0.2), vec![true, true, false, true, false]);
    }

    #[test]
    fn components_intersect_across_graphs() {
        let a = TransitionGraph::from_adjacency(&[vec![(1, 0.0)], vec![(0, 0.0)], vec![(2, 0.0)]], 1.0).unwrap();
        let b = TransitionGraph::from_adjacency(&[vec![(0, 0.0)], vec![(1, 0.0)], vec![(2, 0.0)]], 1.0).unwrap();
        let scr = vec![true, true, true];
        assert_eq!(transitive_components(&[a.clone()], &scr, 0.1), vec![0, 0, 1]);
        assert_eq!(transitive_components(&[a, b], &scr, 0.1), vec![0, 1, 2]);
        let l = vec![0, -1, 1, 1];
        assert_eq!(component_count(&l), 2);
    }

    #[test]
    fn a_t_threshold() {
        assert_eq!(a_t_from_values(&[0.0, 0.2, f64::INFINITY], 0.1), vec![true, false, false]);
        assert_eq!(intersect(&[vec![true, true, false], vec![true, false, false]]), vec![true, false, false]);
    }
}
