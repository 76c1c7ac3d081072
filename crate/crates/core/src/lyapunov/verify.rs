use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::ScalarField;
use crate::chaincost::{ChainCostTable, RecurrenceReport};
use crate::error::{Error, Result};
use crate::flow::FlowImageTable;
use crate::space::SampleGrid;

/// Samples `p` where `|f(φ_t p) − f(p)| ≤ η` for some probe time `t`.
pub fn neutral_set(field: &ScalarField, table: &FlowImageTable, probe_times: &[f64], eta: f64) -> Result<Vec<bool>> {
    let idx = probe_times.iter().map(|&t| table.require_time(t)).collect::<Result<Vec<_>>>()?;
    let f = &field.values;
    Ok((0..f.len())
        .map(|p| idx.iter().any(|&k| (f[table.nearest(p, k)] - f[p]).abs() <= eta))
        .collect())
}

/// Euclidean-in-the-metric distance from every sample to the nearest member
/// of `set`; infinite when the set is empty.
pub fn distance_to_set(grid: &SampleGrid, set: &[bool]) -> Vec<f64> {
    let members: Vec<usize> = (0..set.len()).filter(|&p| set[p]).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if set[p] {
                return 0.0;
            }
            members
                .iter()
                .map(|&q| grid.space().dist(grid.point(p), grid.point(q)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    /// `max_{p,t} f(φ_t p) − f(p)` over the checked times.
    pub violation: f64,
    pub worst_sample: Option<usize>,
    pub worst_time: Option<f64>,
    pub times: Vec<f64>,
    /// `min f(p) − f(φ_{t*} p)` over samples farther than `2h` from SCR.
    pub margin: Option<f64>,
    pub margin_sample: Option<usize>,
    pub margin_time: f64,
    pub margin_samples: usize,
    pub eta: f64,
    pub lipschitz: f64,
    #[serde(skip)]
    pub neutral: Vec<bool>,
    pub neutral_count: usize,
    pub scr_count: usize,
    /// `|N(f) Δ SCR|`.
    pub symmetric_difference: usize,
    pub symmetric_difference_fraction: f64,
    /// SCR samples outside `N(f)`, ignoring those within one cell of the
    /// SCR boundary.
    pub scr_not_neutral: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn verify_lyapunov(
    field: &ScalarField,
    grid: &SampleGrid,
    table: &FlowImageTable,
    times: &[f64],
    probe_times: &[f64],
    margin_time: f64,
    scr: &[bool],
    eta: f64,
    lipschitz: f64,
) -> Result<VerificationReport> {
    if field.len() != grid.len() || scr.len() != grid.len() {
        return Err(Error::Config("field, SCR bitmap and grid sizes differ".into()));
    }
    let f = &field.values;
    let mut violation = f64::NEG_INFINITY;
    let mut worst = None;
    for &t in times {
        let k = table.require_time(t)?;
        for p in 0..f.len() {
            let d = f[table.nearest(p, k)] - f[p];
            if d > violation {
                violation = d;
                worst = Some((p, t));
            }
        }
    }
    let h = grid.mesh();
    let dist = distance_to_set(grid, scr);
    let km = table.require_time(margin_time)?;
    let mut margin: Option<(f64, usize)> = None;
    let mut margin_samples = 0;
    for p in 0..f.len() {
        if dist[p] > 2.0 * h {
            margin_samples += 1;
            let m = f[p] - f[table.nearest(p, km)];
            if margin.is_none_or(|(best, _)| m < best) {
                margin = Some((m, p));
            }
        }
    }
    let neutral = neutral_set(field, table, probe_times, eta)?;
    let complement: Vec<bool> = scr.iter().map(|b| !b).collect();
    let dist_out = distance_to_set(grid, &complement);
    let sym = neutral.iter().zip(scr).filter(|(a, b)| a != b).count();
    Ok(VerificationReport {
        violation: violation.max(0.0),
        worst_sample: worst.map(|w| w.0),
        worst_time: worst.map(|w| w.1),
        times: times.to_vec(),
        margin: margin.map(|m| m.0),
        margin_sample: margin.map(|m| m.1),
        margin_time,
        margin_samples,
        eta,
        lipschitz,
        neutral_count: neutral.iter().filter(|&&b| b).count(),
        scr_count: scr.iter().filter(|&&b| b).count(),
        symmetric_difference: sym,
        symmetric_difference_fraction: sym as f64 / f.len() as f64,
        scr_not_neutral: (0..f.len()).filter(|&p| scr[p] && !neutral[p] && dist_out[p] > h).count(),
        neutral,
    })
}

/// `max |f(p) − f(q)| / d(p, q)` over the given pairs.
pub fn check_lipschitz(field: &ScalarField, grid: &SampleGrid, pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(p, q)| {
            let d = grid.space().dist(grid.point(p), grid.point(q));
            if d > 0.0 {
                (field.values[p] - field.values[q]).abs() / d
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `max f(q) − f(p) − K·L(p, q)` over the stored finite table entries.
pub fn check_dominated(field: &ScalarField, tables: &[ChainCostTable], k: f64) -> f64 {
    let f = &field.values;
    tables
        .iter()
        .flat_map(|t| {
            t.values
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_finite())
                .map(move |(q, &l)| f[q] - f[t.source] - k * l)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub checked: usize,
    pub skipped: usize,
    /// `max |f_x(q) − f_x(r)| − d(q, r)` over grid neighbours; `≤ 0` up to rounding.
    pub endpoint_excess: f64,
    /// `max f_x(φ_t y) − f_x(y)` over samples and chain-step times; `≤ h`.
    pub flow_increase: f64,
    /// `max L(x, x)` over checked `x`; the supremum is attained within this.
    pub self_cost: f64,
    pub epsilon: f64,
    pub mesh: f64,
    pub pass: bool,
}

/// For every SCR sample `x` with a table, check that `f_x = L(x, ·)` is an
/// admissible competitor in the duality formula and attains it within `ε`.
pub fn duality_check(
    grid: &SampleGrid,
    scr: &[bool],
    tables: &[ChainCostTable],
    flow_table: &FlowImageTable,
    steps: &[f64],
    epsilon: f64,
) -> Result<DualityReport> {
    let by_source: HashMap<usize, &ChainCostTable> = tables.iter().map(|t| (t.source, t)).collect();
    let neighbors = grid.neighbor_pairs();
    let idx = steps.iter().map(|&t| flow_table.require_time(t)).collect::<Result<Vec<_>>>()?;
    let mut rep = DualityReport {
        checked: 0,
        skipped: 0,
        endpoint_excess: f64::NEG_INFINITY,
        flow_increase: f64::NEG_INFINITY,
        self_cost: 0.0,
        epsilon,
        mesh: grid.mesh(),
        pass: true,
    };
    for (x, &in_scr) in scr.iter().enumerate() {
        let Some(t) = by_source.get(&x) else { continue };
        if !in_scr {
            rep.skipped += 1;
            continue;
        }
        rep.checked += 1;
        let f = &t.values;
        for &(q, r) in &neighbors {
            if f[q].is_finite() && f[r].is_finite() {
                let d = grid.space().dist(grid.point(q), grid.point(r));
                rep.endpoint_excess = rep.endpoint_excess.max((f[q] - f[r]).abs() - d);
            }
        }
        for y in 0..f.len() {
            if !f[y].is_finite() {
                continue;
            }
            for &k in &idx {
                let img = f[flow_table.nearest(y, k)];
                rep.flow_increase = rep.flow_increase.max(img - f[y]);
            }
        }
        rep.self_cost = rep.self_cost.max(f[x]);
    }
    rep.pass = rep.endpoint_excess <= 1e-9 && rep.flow_increase <= grid.mesh() + 1e-9 && rep.self_cost <= epsilon;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub components: usize,
    /// Per-label `max − min` of the field.
    pub spreads: Vec<f64>,
    pub max_spread: f64,
    pub tolerance: f64,
    /// Component pairs whose value ranges are more than `tolerance` apart.
    pub separated_pairs: usize,
    pub total_pairs: usize,
    /// Largest gap between the value ranges of two components.
    pub max_gap: f64,
}

pub fn component_constancy(field: &ScalarField, labels: &[i64], tolerance: f64) -> ComponentReport {
    let count = labels.iter().filter(|&&l| l >= 0).max().map_or(0, |&m| m as usize + 1);
    let mut lo = vec![f64::INFINITY; count];
    let mut hi = vec![f64::NEG_INFINITY; count];
    for (&l, &v) in labels.iter().zip(&field.values) {
        if l >= 0 {
            lo[l as usize] = lo[l as usize].min(v);
            hi[l as usize] = hi[l as usize].max(v);
        }
    }
    let spreads: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    let mut separated = 0;
    let mut max_gap = f64::NEG_INFINITY;
    for a in 0..count {
        for b in a + 1..count {
            let gap = (lo[b] - hi[a]).max(lo[a] - hi[b]);
            max_gap = max_gap.max(gap);
            if gap > tolerance {
                separated += 1;
            }
        }
    }
    ComponentReport {
        components: count,
        max_spread: spreads.iter().cloned().fold(0.0, f64::max),
        spreads,
        tolerance,
        separated_pairs: separated,
        total_pairs: count * count.saturating_sub(1) / 2,
        max_gap,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScrCrComparison {
    pub scr_count: usize,
    pub cr_count: usize,
    pub symmetric_difference: usize,
    pub cr_not_scr: usize,
    pub scr_not_cr: usize,
    /// Field values on SCR, ascending.
    pub scr_values: Vec<f64>,
    /// The largest gaps between consecutive sorted SCR values, as `(low, high)`.
    pub largest_gaps: Vec<(f64, f64)>,
}

pub fn scr_cr_compare(report: &RecurrenceReport, field: &ScalarField) -> ScrCrComparison {
    let mut vals: Vec<f64> = (0..report.scr.len()).filter(|&p| report.scr[p]).map(|p| field.values[p]).collect();
    vals.sort_by(f64::total_cmp);
    let mut gaps: Vec<(f64, f64)> = vals.windows(2).map(|w| (w[0], w[1])).collect();
    gaps.sort_by(|a, b| (b.1 - b.0).total_cmp(&(a.1 - a.0)).then(a.0.total_cmp(&b.0)));
    gaps.truncate(10);
    let pairs = report.scr.iter().zip(&report.cr);
    ScrCrComparison {
        scr_count: report.scr_count(),
        cr_count: report.cr_count(),
        symmetric_difference: pairs.clone().filter(|(a, b)| a != b).count(),
        cr_not_scr: pairs.clone().filter(|(a, b)| !**a && **b).count(),
        scr_not_cr: pairs.filter(|(a, b)| **a && !**b).count(),
        scr_values: vals,
        largest_gaps: gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{flow_image_table, FlowMap, DEFAULT_DT};
    use crate::space::build_grid;
    use crate::systems::{instantiate, SystemId};

    fn setup(id: SystemId, res: usize) -> (SampleGrid, FlowImageTable) {
        let sys = instantiate(id);
        let grid = build_grid(&sys.space, &[res]).unwrap();
        let map = FlowMap::new(sys.space, sys.field, DEFAULT_DT).unwrap();
        let table = flow_image_table(&map, &grid, &[0.0, 0.25, 0.5, 1.0, 2.0]).unwrap();
        (grid, table)
    }

    #[test]
    fn constant_field_is_first_integral() {
        let (grid, table) = setup(SystemId::CircleFig1, 32);
        let f = ScalarField::user(vec![1.5; 32]).unwrap();
        let n = neutral_set(&f, &table, &[0.5, 1.0, 2.0], 1e-12).unwrap();
        assert!(n.iter().all(|&b| b));
        let scr = vec![false; 32];
        let r = verify_lyapunov(&f, &grid, &table, &[0.25, 0.5, 1.0, 2.0], &[0.5, 1.0, 2.0], 1.0, &scr, 0.01, 0.0).unwrap();
        assert_eq!(r.violation, 0.0);
        assert_eq!(r.margin, Some(0.0));
        assert_eq!(check_lipschitz(&f, &grid, &grid.neighbor_pairs()), 0.0);
        let c = component_constancy(&f, &[0, 0, 1, -1], 1e-9);
        assert_eq!(c.max_spread, 0.0);
    }

    #[test]
    fn zero_flow_everything_neutral() {
        let (_, table) = setup(SystemId::CircleZero, 16);
        let f = ScalarField::user((0..16).map(|i| (i as f64).sin()).collect()).unwrap();
        assert!(neutral_set(&f, &table, &[0.5, 1.0, 2.0], 0.0).unwrap().iter().all(|&b| b));
    }

    #[test]
    fn lipschitz_of_linear() {
        let sys = instantiate(SystemId::BoxGradient);
        let grid = build_grid(&sys.space, &[9]).unwrap();
        let f = ScalarField::user(grid.points().iter().map(|p| 3.0 * p.x()).collect()).unwrap();
        let r = check_lipschitz(&f, &grid, &grid.neighbor_pairs());
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_set_on_circle() {
        let (grid, _) = setup(SystemId::CircleZero, 8);
        let mut s = vec![false; 8];
        s[0] = true;
        let d = distance_to_set(&grid, &s);
        assert_eq!(d[0], 0.0);
        assert!((d[4] - 0.5).abs() < 1e-15);
        assert!((d[7] - 0.125).abs() < 1e-15);
        assert!(distance_to_set(&grid, &[false; 8]).iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn component_separation() {
        let f = ScalarField::user(vec![0.0, 0.01, 1.0, 1.02, 5.0]).unwrap();
        let c = component_constancy(&f, &[0, 0, 1, 1, -1], 0.1);
        assert_eq!(c.components, 2);
        assert!((c.max_spread - 0.02).abs() < 1e-15);
        assert_eq!(c.separated_pairs, 1);
        assert!((c.max_gap - 0.99).abs() < 1e-12);
    }

    #[test]
    fn dominated_constant() {
        let f = ScalarField::user(vec![2.0; 3]).unwrap();
        let t = ChainCostTable { source: 0, values: vec![0.1, f64::INFINITY, 0.3], budget: 1.0, t_min: None };
        assert!(check_dominated(&f, &[t], 1.0) <= 0.0);
    }
}
