//! Numerical flow maps, cached flow images and the Lipschitz envelope `M_s`.
//!
//! Integration is classical fourth-order Runge–Kutta with a fixed step `dt`
//! on the global lattice `k·dt`, followed by one partial step that lands
//! exactly on the requested time. Because steps are anchored to the lattice,
//! integrating incrementally through a sorted list of times reproduces
//! `flow(p, t)` bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Point, SampleGrid, SpaceDescriptor, MAX_DIM};
use crate::systems::SystemId;

/// At 1/256 the torus_example42 flow still moves by ~1.4e-8 when dt is halved.
pub const DEFAULT_DT: f64 = 1.0 / 512.0;

/// A vector field on one of the supported spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VectorFieldSpec {
    Builtin { system: SystemId },
    /// Constant velocity.
    Constant { velocity: Vec<f64> },
    /// Values on a uniform lattice of the space (same layout as
    /// [`SampleGrid`]), interpolated multilinearly.
    Tabulated {
        resolution: Vec<usize>,
        components: Vec<Vec<f64>>,
    },
}

impl VectorFieldSpec {
    pub fn validate(&self, space: &SpaceDescriptor) -> Result<()> {
        match self {
            VectorFieldSpec::Builtin { system } => {
                if system.space().kind != space.kind {
                    return Err(Error::Config(format!("system {system} does not live on a {:?}", space.kind)));
                }
            }
            VectorFieldSpec::Constant { velocity } => {
                if velocity.len() != space.dim() {
                    return Err(Error::Config("constant field dimension mismatch".into()));
                }
                if velocity.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("constant field must be finite".into()));
                }
            }
            VectorFieldSpec::Tabulated { resolution, components } => {
                if resolution.len() != space.dim() || components.len() != space.dim() {
                    return Err(Error::Config("tabulated field dimension mismatch".into()));
                }
                if resolution.iter().any(|&r| r < 2) {
                    return Err(Error::Config("tabulated field needs at least 2 nodes per axis".into()));
                }
                let n: usize = resolution.iter().product();
                if components.iter().any(|c| c.len() != n) {
                    return Err(Error::Config(format!("tabulated field needs {n} values per component")));
                }
                if components.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Config("tabulated field must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Field value at canonical coordinates `x`.
    pub fn eval(&self, space: &SpaceDescriptor, x: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        match self {
            VectorFieldSpec::Builtin { system } => system.eval(x),
            VectorFieldSpec::Constant { velocity } => {
                let mut v = [0.0; MAX_DIM];
                v[..velocity.len()].copy_from_slice(velocity);
                v
            }
            VectorFieldSpec::Tabulated { resolution, components } => {
                tabulated_eval(space, resolution, components, x)
            }
        }
    }
}

fn tabulated_eval(space: &SpaceDescriptor, resolution: &[usize], components: &[Vec<f64>], x: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    let dim = space.dim();
    // per axis: two node indices and the weight of the upper one
    let mut lo = [0usize; MAX_DIM];
    let mut hi = [0usize; MAX_DIM];
    let mut w = [0.0f64; MAX_DIM];
    for a in 0..dim {
        let n = resolution[a];
        let e = space.extents[a];
        if space.periodic[a] {
            let u = x[a] / (e / n as f64);
            let f = u.floor();
            lo[a] = (f as i64).rem_euclid(n as i64) as usize;
            hi[a] = (lo[a] + 1) % n;
            w[a] = u - f;
        } else {
            let u = (x[a] / (e / (n - 1) as f64)).clamp(0.0, (n - 1) as f64);
            let f = u.floor().min((n - 2) as f64);
            lo[a] = f as usize;
            hi[a] = lo[a] + 1;
            w[a] = u - f;
        }
    }
    let mut out = [0.0; MAX_DIM];
    for (c, values) in components.iter().enumerate() {
        out[c] = if dim == 1 {
            values[lo[0]] * (1.0 - w[0]) + values[hi[0]] * w[0]
        } else {
            let at = |i: usize, j: usize| values[i * resolution[1] + j];
            let a = at(lo[0], lo[1]) * (1.0 - w[1]) + at(lo[0], hi[1]) * w[1];
            let b = at(hi[0], lo[1]) * (1.0 - w[1]) + at(hi[0], hi[1]) * w[1];
            a * (1.0 - w[0]) + b * w[0]
        };
    }
    out
}

/// The flow `φ_t` of a vector field, realized by fixed-step integration.
#[derive(Clone, Debug)]
pub struct FlowMap {
    space: SpaceDescriptor,
    field: VectorFieldSpec,
    dt: f64,
}

impl FlowMap {
    pub fn new(space: SpaceDescriptor, field: VectorFieldSpec, dt: f64) -> Result<Self> {
        space.validate()?;
        field.validate(&space)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("integrator step {dt} must be positive")));
        }
        Ok(FlowMap { space, field, dt })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn field(&self) -> &VectorFieldSpec {
        &self.field
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Field value at a point.
    pub fn velocity(&self, p: &Point) -> [f64; MAX_DIM] {
        self.field.eval(&self.space, p.raw())
    }

    /// `φ_t(p)` for `t ≥ 0`.
    pub fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Input(format!("flow time {t} must be finite and non-negative")));
        }
        Ok(Trajectory::new(self, p).advance_to(t))
    }

    fn rhs(&self, raw: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let c = self.space.canonical(raw);
        self.field.eval(&self.space, c.raw())
    }

    fn rk4(&self, y: [f64; MAX_DIM], h: f64) -> [f64; MAX_DIM] {
        let dim = self.space.dim();
        let add = |a: [f64; MAX_DIM], b: [f64; MAX_DIM], s: f64| {
            let mut r = a;
            for i in 0..dim {
                r[i] = a[i] + s * b[i];
            }
            r
        };
        let k1 = self.rhs(y);
        let k2 = self.rhs(add(y, k1, h / 2.0));
        let k3 = self.rhs(add(y, k2, h / 2.0));
        let k4 = self.rhs(add(y, k3, h));
        let mut out = y;
        for i in 0..dim {
            out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// Incremental integration along the global step lattice.
struct Trajectory<'a> {
    map: &'a FlowMap,
    start: Point,
    state: [f64; MAX_DIM],
    steps: u64,
}

impl<'a> Trajectory<'a> {
    fn new(map: &'a FlowMap, p: &Point) -> Self {
        Trajectory { map, start: *p, state: p.raw(), steps: 0 }
    }

    /// Point at time `t`; `t` must not decrease between calls.
    fn advance_to(&mut self, t: f64) -> Point {
        if t == 0.0 {
            return self.start;
        }
        let dt = self.map.dt;
        let n = (t / dt).floor() as u64;
        while self.steps < n {
            self.state = self.map.rk4(self.state, dt);
            self.steps += 1;
        }
        let rest = t - n as f64 * dt;
        let end = if rest > 0.0 { self.map.rk4(self.state, rest) } else { self.state };
        self.map.space.canonical(end)
    }
}

/// Flow images of every sample at a sorted list of times, with the index of
/// the nearest sample to each image.
#[derive(Clone, Debug)]
pub struct FlowImageTable {
    times: Vec<f64>,
    samples: usize,
    images: Vec<Point>,
    nearest: Vec<u32>,
}

const TIME_MATCH_TOL: f64 = 1e-9;

impl FlowImageTable {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    #[inline]
    pub fn image(&self, sample: usize, time_idx: usize) -> &Point {
        &self.images[sample * self.times.len() + time_idx]
    }

    #[inline]
    pub fn nearest(&self, sample: usize, time_idx: usize) -> usize {
        self.nearest[sample * self.times.len() + time_idx] as usize
    }

    /// Position of `t` in the table's time list, if present.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let pos = self.times.partition_point(|&s| s < t - TIME_MATCH_TOL);
        (pos < self.times.len() && (self.times[pos] - t).abs() <= TIME_MATCH_TOL).then_some(pos)
    }

    pub fn require_time(&self, t: f64) -> Result<usize> {
        self.time_index(t)
            .ok_or_else(|| Error::Config(format!("time {t} is not in the flow image table")))
    }
}

/// Compute `flow(grid[i], t)` for every sample and time.
pub fn flow_image_table(map: &FlowMap, grid: &SampleGrid, times: &[f64]) -> Result<FlowImageTable> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Input("flow times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input("flow times must be sorted ascending".into()));
    }
    let rows: Vec<(Vec<Point>, Vec<u32>)> = grid
        .points()
        .par_iter()
        .map(|p| {
            let mut traj = Trajectory::new(map, p);
            let imgs: Vec<Point> = times.iter().map(|&t| traj.advance_to(t)).collect();
            let near = imgs.iter().map(|q| grid.nearest_sample(q) as u32).collect();
            (imgs, near)
        })
        .collect();
    let mut images = Vec::with_capacity(grid.len() * times.len());
    let mut nearest = Vec::with_capacity(grid.len() * times.len());
    for (i, n) in rows {
        images.extend(i);
        nearest.extend(n);
    }
    Ok(FlowImageTable { times: times.to_vec(), samples: grid.len(), images, nearest })
}

/// Sorted union of time lists, merging values closer than the lookup tolerance.
pub fn merge_times<I: IntoIterator<Item = f64>>(times: I) -> Vec<f64> {
    let mut all: Vec<f64> = times.into_iter().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= TIME_MATCH_TOL);
    all
}

/// `M_s` sampled at increasing `s` values; nondecreasing and `≥ 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzEnvelope {
    pub s_values: Vec<f64>,
    pub m_values: Vec<f64>,
    /// Empirical sup of the pairwise expansion ratio before safety scaling.
    pub raw_sup: Vec<f64>,
    pub safety: f64,
}

impl LipschitzEnvelope {
    /// Constant envelope.
    pub fn constant(s_values: Vec<f64>, m: f64) -> Self {
        let n = s_values.len();
        LipschitzEnvelope { s_values, m_values: vec![m; n], raw_sup: vec![m; n], safety: 1.0 }
    }

    /// `M` at `s`, taken from the first tabulated `s_k ≥ s` (an upper bound
    /// since the envelope is nondecreasing).
    pub fn at(&self, s: f64) -> Result<f64> {
        let pos = self.s_values.partition_point(|&v| v < s - TIME_MATCH_TOL);
        self.m_values
            .get(pos)
            .copied()
            .ok_or_else(|| Error::Config(format!("Lipschitz envelope does not cover s = {s}")))
    }

    pub fn max_s(&self) -> f64 {
        self.s_values.last().copied().unwrap_or(0.0)
    }
}

/// Deterministic set of sample pairs at distance `≤ 4h`: all grid-adjacent
/// pairs followed by seeded pseudorandom pairs until `min_pairs` is reached.
pub fn lipschitz_pairs(grid: &SampleGrid, min_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut pairs = grid.neighbor_pairs();
    let radius = 4.0 * grid.mesh();
    let space = grid.space();
    let reach: Vec<i64> = grid.spacing().iter().map(|s| (radius / s).floor() as i64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    while pairs.len() < min_pairs && attempts < 100 * min_pairs.max(1) {
        attempts += 1;
        let p = rng.random_range(0..grid.len());
        let multi = grid.multi_index(p);
        let mut m = [0usize; MAX_DIM];
        let mut valid = true;
        for a in 0..space.dim() {
            let n = grid.resolution()[a] as i64;
            let off = rng.random_range(-reach[a]..=reach[a]);
            let k = multi[a] as i64 + off;
            m[a] = if space.periodic[a] {
                k.rem_euclid(n) as usize
            } else if (0..n).contains(&k) {
                k as usize
            } else {
                valid = false;
                0
            };
        }
        if !valid {
            continue;
        }
        let q = grid.index(&m[..space.dim()]);
        let d = space.dist(grid.point(p), grid.point(q));
        if q != p && d <= radius && d >= 1e-12 {
            pairs.push((p, q));
        }
    }
    pairs
}

/// Safety-scaled envelope value from an empirical sup: the excess over 1 is
/// scaled, so isometric flows keep `M = 1`.
fn scaled(sup: f64, safety: f64) -> f64 {
    1.0 + safety * (sup - 1.0).max(0.0)
}

/// Estimate `M_s` from cached flow images; the ratio sup at `s` runs over
/// every table time `t ≤ s`.
pub fn estimate_lipschitz_from_table(
    table: &FlowImageTable,
    grid: &SampleGrid,
    s_values: &[f64],
    pairs: &[(usize, usize)],
    safety: f64,
) -> Result<LipschitzEnvelope> {
    if s_values.windows(2).any(|w| w[1] < w[0]) || s_values.first().is_some_and(|s| *s < 0.0) {
        return Err(Error::Input("s values must be sorted and non-negative".into()));
    }
    if let Some(&last) = s_values.last() {
        if table.times().last().copied().unwrap_or(0.0) < last - TIME_MATCH_TOL {
            return Err(Error::Config("flow table does not reach the largest s".into()));
        }
    }
    let space = grid.space();
    let times = table.times();
    // sup over pairs of the ratio at each table time
    let per_time: Vec<f64> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            pairs
                .iter()
                .filter_map(|&(p, q)| {
                    let d0 = space.dist(grid.point(p), grid.point(q));
                    (d0 >= 1e-12).then(|| space.dist(table.image(p, k), table.image(q, k)) / d0)
                })
                .fold(1.0f64, f64::max)
        })
        .collect();

    let mut raw_sup = Vec::with_capacity(s_values.len());
    let mut m_values = Vec::with_capacity(s_values.len());
    let mut running = 1.0f64;
    let mut k = 0;
    for &s in s_values {
        while k < times.len() && times[k] <= s + TIME_MATCH_TOL {
            running = running.max(per_time[k]);
            k += 1;
        }
        raw_sup.push(running);
        m_values.push(scaled(running, safety));
    }
    // running max already makes both sequences nondecreasing
    Ok(LipschitzEnvelope { s_values: s_values.to_vec(), m_values, raw_sup, safety })
}

/// Options for [`estimate_lipschitz`].
#[derive(Clone, Debug)]
pub struct LipschitzOptions {
    pub min_pairs: usize,
    pub seed: u64,
    pub safety: f64,
    /// Step of the time refinement of `[0, s]`.
    pub refine: f64,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions { min_pairs: 1000, seed: 7, safety: 1.25, refine: 1.0 / 16.0 }
    }
}

/// Estimate the envelope `M_s` directly from the flow map.
pub fn estimate_lipschitz(map: &FlowMap, grid: &SampleGrid, s_values: &[f64], opts: &LipschitzOptions) -> Result<LipschitzEnvelope> {
    let max_s = s_values.last().copied().unwrap_or(0.0);
    let steps = (max_s / opts.refine).ceil() as usize;
    let times = merge_times((0..=steps).map(|k| (k as f64 * opts.refine).min(max_s)).chain(s_values.iter().copied()));
    let table = flow_image_table(map, grid, &times)?;
    let pairs = lipschitz_pairs(grid, opts.min_pairs, opts.seed);
    estimate_lipschitz_from_table(&table, grid, s_values, &pairs, opts.safety)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_grid;
    use crate::systems::{instantiate, SystemId};

    fn map_for(id: SystemId) -> FlowMap {
        let sys = instantiate(id);
        FlowMap::new(sys.space, sys.field, DEFAULT_DT).unwrap()
    }

    #[test]
    fn rotation_quarter_turn() {
        let m = map_for(SystemId::CircleRotation);
        let p = m.space().point(&[0.0]).unwrap();
        assert!((m.flow(&p, 0.25).unwrap().x() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn example42_central_band_is_vertical_rotation() {
        let m = map_for(SystemId::TorusExample42);
        let p = m.space().point(&[0.5, 0.2]).unwrap();
        let q = m.flow(&p, 0.3).unwrap();
        assert_eq!(q.x(), 0.5);
        assert!((q.y() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let m = map_for(SystemId::TorusExample42);
        let p = m.space().point(&[0.1, 0.7]).unwrap();
        assert_eq!(m.flow(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn invalid_time() {
        let m = map_for(SystemId::CircleRotation);
        let p = m.space().point(&[0.0]).unwrap();
        assert!(matches!(m.flow(&p, f64::NAN), Err(Error::Input(_))));
        assert!(matches!(m.flow(&p, -1.0), Err(Error::Input(_))));
    }

    #[test]
    fn fixed_points_stay_put() {
        // field vanishes at these points analytically
        let cases: [(SystemId, &[f64]); 5] = [
            (SystemId::CircleFig1, &[0.3]),
            (SystemId::CircleFig2, &[0.875]),
            (SystemId::BoxGradient, &[0.5]),
            (SystemId::CircleZero, &[0.42]),
            (SystemId::CircleFig1, &[0.25]),
        ];
        for (id, x) in cases {
            let m = map_for(id);
            let p = m.space().point(x).unwrap();
            assert!(m.velocity(&p)[0].abs() < 1e-12);
            let q = m.flow(&p, 5.0).unwrap();
            assert!(m.space().dist(&p, &q) < 1e-9, "{id} at {x:?}");
        }
    }

    #[test]
    fn table_matches_direct_flow_bitwise() {
        let m = map_for(SystemId::TorusExample42);
        let grid = build_grid(m.space(), &[8, 8]).unwrap();
        let times = [0.0, 0.3, 0.5, 1.0, 1.7, 2.0];
        let table = flow_image_table(&m, &grid, &times).unwrap();
        for i in 0..grid.len() {
            for (k, &t) in times.iter().enumerate() {
                assert_eq!(*table.image(i, k), m.flow(grid.point(i), t).unwrap());
                assert_eq!(table.nearest(i, k), grid.nearest_sample(table.image(i, k)));
            }
        }
    }

    #[test]
    fn table_examples() {
        let rot = map_for(SystemId::CircleRotation);
        let g = build_grid(rot.space(), &[8]).unwrap();
        let t = flow_image_table(&rot, &g, &[1.0]).unwrap();
        assert!(rot.space().dist(t.image(0, 0), g.point(0)) < 1e-12);

        let zero = map_for(SystemId::CircleZero);
        let t = flow_image_table(&zero, &g, &[0.5, 1.0, 3.0]).unwrap();
        for i in 0..8 {
            for k in 0..3 {
                assert_eq!(t.image(i, k), g.point(i));
            }
        }

        let ex = map_for(SystemId::TorusExample42);
        let g = build_grid(ex.space(), &[4, 4]).unwrap();
        let t = flow_image_table(&ex, &g, &[0.5]).unwrap();
        let idx = g.index(&[2, 0]);
        assert_eq!(g.point(idx).coords(), &[0.5, 0.0]);
        let img = t.image(idx, 0);
        assert_eq!(img.x(), 0.5);
        assert!((img.y() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unsorted_times_rejected() {
        let m = map_for(SystemId::CircleRotation);
        let g = build_grid(m.space(), &[8]).unwrap();
        assert!(flow_image_table(&m, &g, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn envelope_isometries_are_one() {
        for id in [SystemId::CircleRotation, SystemId::CircleZero] {
            let m = map_for(id);
            let g = build_grid(m.space(), &[32]).unwrap();
            let env = estimate_lipschitz(&m, &g, &[0.0, 0.5, 1.0, 2.0], &LipschitzOptions::default()).unwrap();
            for v in &env.m_values {
                assert!((v - 1.0).abs() < 1e-9, "{id}: {v}");
            }
        }
    }

    #[test]
    fn envelope_is_monotone_and_at_least_one() {
        let m = map_for(SystemId::CircleFig2);
        let g = build_grid(m.space(), &[64]).unwrap();
        let s: Vec<f64> = (0..=16).map(|k| k as f64 * 0.25).collect();
        let env = estimate_lipschitz(&m, &g, &s, &LipschitzOptions::default()).unwrap();
        assert!(env.m_values.windows(2).all(|w| w[1] >= w[0]));
        assert!(env.m_values.iter().all(|&v| v >= 1.0));
        assert!(env.m_values.last().unwrap() > &1.0);
        assert!(env.at(0.3).unwrap() >= env.at(0.25).unwrap());
        assert!(env.at(100.0).is_err());
    }

    #[test]
    fn pairs_are_close_and_plentiful() {
        let g = build_grid(&SpaceDescriptor::torus2(1.0, 1.0).unwrap(), &[16, 16]).unwrap();
        let pairs = lipschitz_pairs(&g, 1000, 3);
        assert!(pairs.len() >= 1000);
        for &(p, q) in &pairs {
            let d = g.space().dist(g.point(p), g.point(q));
            assert!(d > 0.0 && d <= 4.0 * g.mesh() + 1e-15);
        }
        assert_eq!(pairs, lipschitz_pairs(&g, 1000, 3));
    }

    #[test]
    fn tabulated_field_interpolates() {
        let space = SpaceDescriptor::circle(1.0).unwrap();
        let field = VectorFieldSpec::Tabulated { resolution: vec![4], components: vec![vec![0.0, 1.0, 2.0, 1.0]] };
        field.validate(&space).unwrap();
        assert!((field.eval(&space, [0.125, 0.0])[0] - 0.5).abs() < 1e-15);
        assert!((field.eval(&space, [0.875, 0.0])[0] - 0.5).abs() < 1e-15);
        let bad = VectorFieldSpec::Tabulated { resolution: vec![4], components: vec![vec![0.0; 3]] };
        assert!(bad.validate(&space).is_err());
    }

    #[test]
    fn merge_times_dedups() {
        assert_eq!(merge_times([1.0, 0.5, 1.0 + 1e-12, 0.0]), vec![0.0, 0.5, 1.0]);
    }
}
