use rayon::prelude::*;
use serde::Serialize;

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::flow::FlowImageTable;
use crate::space::{Point, SampleGrid, MAX_DIM};

/// Directed graph on grid samples. The edge `p → q` carries the cheapest
/// single chain step from `p` to `q`: `min_{t ∈ steps} d(φ_t(p), q)`, and is
/// stored only when that weight does not exceed the budget.
///
/// Adjacency is kept in compressed-row form, edges sorted by target index.
#[derive(Clone, Debug)]
pub struct TransitionGraph {
    nodes: usize,
    budget: f64,
    timegrid: Option<TimeGrid>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub isolated: usize,
    pub budget: f64,
}

impl TransitionGraph {
    /// Build the transition graph of `grid` under the flow cached in `table`.
    pub fn build(grid: &SampleGrid, table: &FlowImageTable, timegrid: &TimeGrid, budget: f64) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::Config(format!("budget {budget} must be positive")));
        }
        if table.samples() != grid.len() {
            return Err(Error::Config("flow table was built for a different grid".into()));
        }
        let step_idx = timegrid
            .steps()
            .iter()
            .map(|&t| table.require_time(t))
            .collect::<Result<Vec<_>>>()?;
        let n = grid.len();
        let dense = budget >= grid.space().diameter();

        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![f64::INFINITY; n], Vec::<usize>::new()),
                |(best, touched), p| {
                    let images: Vec<Point> = step_idx.iter().map(|&k| *table.image(p, k)).collect();
                    if dense {
                        (0..n)
                            .filter_map(|q| {
                                let w = min_distance(grid, &images, q);
                                (w <= budget).then_some((q as u32, w))
                            })
                            .collect()
                    } else {
                        for img in &images {
                            for_each_sample_near(grid, img, budget, |q| {
                                let d = grid.space().dist(img, grid.point(q));
                                if best[q] == f64::INFINITY {
                                    touched.push(q);
                                }
                                if d < best[q] {
                                    best[q] = d;
                                }
                            });
                        }
                        touched.sort_unstable();
                        let row = touched
                            .iter()
                            .filter(|&&q| best[q] <= budget)
                            .map(|&q| (q as u32, best[q]))
                            .collect();
                        for &q in touched.iter() {
                            best[q] = f64::INFINITY;
                        }
                        touched.clear();
                        row
                    }
                },
            )
            .collect();
        Ok(Self::from_rows(rows, budget, Some(timegrid.clone())))
    }

    /// Graph from explicit weighted adjacency lists. Edges above the budget
    /// are dropped, parallel edges keep the smallest weight.
    pub fn from_adjacency(adjacency: &[Vec<(usize, f64)>], budget: f64) -> Result<Self> {
        let n = adjacency.len();
        let mut rows = Vec::with_capacity(n);
        for (p, list) in adjacency.iter().enumerate() {
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(list.len());
            for &(q, w) in list {
                if q >= n {
                    return Err(Error::Input(format!("edge {p} -> {q} leaves the graph")));
                }
                if !(w >= 0.0) {
                    return Err(Error::Input(format!("edge {p} -> {q} has invalid weight {w}")));
                }
                if w <= budget {
                    row.push((q as u32, w));
                }
            }
            row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            row.dedup_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(Self::from_rows(rows, budget, None))
    }

    fn from_rows(rows: Vec<Vec<(u32, f64)>>, budget: f64, timegrid: Option<TimeGrid>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        offsets.push(0);
        for row in &rows {
            for &(q, w) in row {
                targets.push(q);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        TransitionGraph { nodes: rows.len(), budget, timegrid, offsets, targets, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn timegrid(&self) -> Option<&TimeGrid> {
        self.timegrid.as_ref()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Out-edges of `p` as `(target, weight)`, ordered by target.
    #[inline]
    pub fn edges(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[p]..self.offsets[p + 1];
        self.targets[r.clone()].iter().zip(&self.weights[r]).map(|(&q, &w)| (q as usize, w))
    }

    /// Weight of `p → q`, if stored.
    pub fn weight(&self, p: usize, q: usize) -> Option<f64> {
        let r = self.offsets[p]..self.offsets[p + 1];
        let row = &self.targets[r.clone()];
        row.binary_search(&(q as u32)).ok().map(|i| self.weights[r.start + i])
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.nodes,
            edges: self.edge_count(),
            isolated: (0..self.nodes).filter(|&p| self.offsets[p] == self.offsets[p + 1]).count(),
            budget: self.budget,
        }
    }

    /// Edge-wise minimum of graphs on the same nodes. A chain step of the
    /// result is a step of one of the inputs, so the result carries the
    /// time grid and budget of the input with the smallest `T`.
    pub fn merge_min(graphs: &[TransitionGraph]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::Config("no graphs to merge".into()))?;
        if graphs.iter().any(|g| g.nodes != first.nodes) {
            return Err(Error::Config("merged graphs must share their nodes".into()));
        }
        let base = graphs
            .iter()
            .min_by(|a, b| {
                let ta = a.timegrid.as_ref().map_or(f64::INFINITY, |t| t.t_min());
                let tb = b.timegrid.as_ref().map_or(f64::INFINITY, |t| t.t_min());
                ta.total_cmp(&tb)
            })
            .unwrap();
        let budget = graphs.iter().map(|g| g.budget).fold(f64::INFINITY, f64::min);
        let rows = (0..first.nodes)
            .map(|p| {
                let mut row: Vec<(u32, f64)> = graphs
                    .iter()
                    .flat_map(|g| g.edges(p).filter(|e| e.1 <= budget).map(|(q, w)| (q as u32, w)))
                    .collect();
                row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
                row.dedup_by_key(|e| e.0);
                row
            })
            .collect();
        Ok(Self::from_rows(rows, budget, base.timegrid.clone()))
    }

    /// Same graph with every weight replaced by `f(p, q, w)`; used to inject
    /// faults in negative-control runs.
    pub fn map_weights(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut g = self.clone();
        for p in 0..self.nodes {
            for e in self.offsets[p]..self.offsets[p + 1] {
                g.weights[e] = f(p, self.targets[e] as usize, self.weights[e]);
            }
        }
        g
    }
}

fn min_distance(grid: &SampleGrid, images: &[Point], q: usize) -> f64 {
    let target = grid.point(q);
    images.iter().map(|img| grid.space().dist(img, target)).fold(f64::INFINITY, f64::min)
}

/// Visit every sample whose per-axis separation from `center` is within `radius`
/// (a superset of the samples within `radius`). Each sample is visited once.
fn for_each_sample_near(grid: &SampleGrid, center: &Point, radius: f64, mut visit: impl FnMut(usize)) {
    let space = grid.space();
    let dim = space.dim();
    let mut ranges: [Vec<usize>; MAX_DIM] = Default::default();
    for (a, range) in ranges.iter_mut().enumerate().take(dim) {
        let n = grid.resolution()[a] as i64;
        let h = grid.spacing()[a];
        let c = center.coords()[a] / h;
        let lo = (c - radius / h).floor() as i64;
        let hi = (c + radius / h).ceil() as i64;
        if space.periodic[a] {
            if hi - lo + 1 >= n {
                range.extend(0..n as usize);
            } else {
                range.extend((lo..=hi).map(|k| k.rem_euclid(n) as usize));
            }
        } else {
            range.extend((lo.max(0)..=hi.min(n - 1)).map(|k| k as usize));
        }
    }
    if dim == 1 {
        ranges[0].iter().for_each(|&i| visit(i));
    } else {
        for &i in &ranges[0] {
            for &j in &ranges[1] {
                visit(grid.index(&[i, j]));
            }
        }
    }
}
