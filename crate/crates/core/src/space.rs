//! Compact metric spaces, sample grids and the dense enumeration of samples.
//!
//! Supported spaces are the circle `R/eZ`, the flat torus `R²/(e₁Z × e₂Z)`
//! and Euclidean boxes of dimension one or two. Periodic axes use the flat
//! quotient metric: per-axis `min(|Δ|, e − |Δ|)`, combined Euclideanly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 2;

/// Minimum number of samples per axis accepted by [`SampleGrid::build`].
pub const MIN_RESOLUTION: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Circle,
    Torus2,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub extents: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl SpaceDescriptor {
    pub fn circle(extent: f64) -> Result<Self> {
        Self::new(SpaceKind::Circle, vec![extent], vec![true])
    }

    pub fn torus2(ex: f64, ey: f64) -> Result<Self> {
        Self::new(SpaceKind::Torus2, vec![ex, ey], vec![true, true])
    }

    /// Euclidean box `[0, e₁] × … × [0, e_d]` with `d ∈ {1, 2}`.
    pub fn cuboid(extents: Vec<f64>) -> Result<Self> {
        let periodic = vec![false; extents.len()];
        Self::new(SpaceKind::Box, extents, periodic)
    }

    pub fn new(kind: SpaceKind, extents: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        let space = SpaceDescriptor { kind, extents, periodic };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.extents.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("unsupported dimension {dim}")));
        }
        if self.periodic.len() != dim {
            return Err(Error::Config("periodic flags do not match extents".into()));
        }
        if let Some(e) = self.extents.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("extent {e} must be finite and positive")));
        }
        match self.kind {
            SpaceKind::Circle if dim != 1 => Err(Error::Config("circle must be 1-dimensional".into())),
            SpaceKind::Torus2 if dim != 2 => Err(Error::Config("torus2 must be 2-dimensional".into())),
            SpaceKind::Circle | SpaceKind::Torus2 if self.periodic.iter().any(|p| !p) => {
                Err(Error::Config("circle and torus2 are periodic on every axis".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    /// Largest distance between two points of the space.
    pub fn diameter(&self) -> f64 {
        let sq: f64 = self
            .extents
            .iter()
            .zip(&self.periodic)
            .map(|(&e, &per)| if per { (e / 2.0).powi(2) } else { e * e })
            .sum();
        sq.sqrt()
    }

    /// Build a canonical point from raw coordinates.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.dim() {
            return Err(Error::Input(format!(
                "point has {} coordinates, space has dimension {}",
                coords.len(),
                self.dim()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("non-finite coordinate".into()));
        }
        let mut raw = [0.0; MAX_DIM];
        raw[..coords.len()].copy_from_slice(coords);
        Ok(self.canonical(raw))
    }

    /// Wrap periodic axes into `[0, e)` and clamp box axes into `[0, e]`.
    pub fn canonical(&self, raw: [f64; MAX_DIM]) -> Point {
        let mut coords = [0.0; MAX_DIM];
        for (axis, c) in coords.iter_mut().enumerate().take(self.dim()) {
            let e = self.extents[axis];
            let x = raw[axis];
            *c = if self.periodic[axis] {
                let w = x.rem_euclid(e);
                // rem_euclid can round up to exactly `e` for tiny negative inputs
                if w >= e {
                    0.0
                } else {
                    w
                }
            } else {
                x.clamp(0.0, e)
            };
        }
        Point { coords, dim: self.dim() as u8 }
    }

    /// Per-axis separation under the quotient metric.
    #[inline]
    pub fn axis_gap(&self, axis: usize, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if self.periodic[axis] {
            let e = self.extents[axis];
            d.min(e - d)
        } else {
            d
        }
    }

    /// Distance without dimension checks; both points must belong to this space.
    #[inline]
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        debug_assert_eq!(p.dim(), self.dim());
        debug_assert_eq!(q.dim(), self.dim());
        if self.dim() == 1 {
            return self.axis_gap(0, p.coords[0], q.coords[0]);
        }
        let dx = self.axis_gap(0, p.coords[0], q.coords[0]);
        let dy = self.axis_gap(1, p.coords[1], q.coords[1]);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Checked metric of the space.
pub fn distance(space: &SpaceDescriptor, p: &Point, q: &Point) -> Result<f64> {
    if p.dim() != space.dim() || q.dim() != space.dim() {
        return Err(Error::Input(format!(
            "dimension mismatch: space {}, points {} and {}",
            space.dim(),
            p.dim(),
            q.dim()
        )));
    }
    Ok(space.dist(p, q))
}

/// A point of a space, with coordinates in canonical range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn raw(&self) -> [f64; MAX_DIM] {
        self.coords
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }
}

/// Uniform lattice of samples on a space.
///
/// Samples are stored in row-major order over the axes (last axis fastest).
/// Periodic axes carry `n` samples at `k·e/n`; box axes carry `n` samples at
/// `k·e/(n−1)`, endpoints included.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    space: SpaceDescriptor,
    resolution: Vec<usize>,
    spacing: Vec<f64>,
    points: Vec<Point>,
    mesh: f64,
    dense_order: Vec<usize>,
}

impl SampleGrid {
    pub fn build(space: &SpaceDescriptor, resolution: &[usize]) -> Result<Self> {
        space.validate()?;
        if resolution.len() != space.dim() {
            return Err(Error::Config(format!(
                "resolution has {} entries, space has dimension {}",
                resolution.len(),
                space.dim()
            )));
        }
        if let Some(r) = resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
            return Err(Error::Config(format!(
                "resolution {r} below the minimum of {MIN_RESOLUTION} samples per axis"
            )));
        }
        let spacing: Vec<f64> = (0..space.dim())
            .map(|a| {
                let n = resolution[a] as f64;
                if space.periodic[a] {
                    space.extents[a] / n
                } else {
                    space.extents[a] / (n - 1.0)
                }
            })
            .collect();
        let axis_coord = |a: usize, k: usize| -> f64 {
            if !space.periodic[a] && k + 1 == resolution[a] {
                space.extents[a]
            } else {
                k as f64 * spacing[a]
            }
        };

        let total: usize = resolution.iter().product();
        let mut points = Vec::with_capacity(total);
        if space.dim() == 1 {
            for k in 0..resolution[0] {
                points.push(space.canonical([axis_coord(0, k), 0.0]));
            }
        } else {
            for i in 0..resolution[0] {
                for j in 0..resolution[1] {
                    points.push(space.canonical([axis_coord(0, i), axis_coord(1, j)]));
                }
            }
        }

        // covering radius: half a cell diagonal
        let mesh = spacing.iter().map(|s| (s / 2.0).powi(2)).sum::<f64>().sqrt();
        let dense_order = dense_order(resolution);
        Ok(SampleGrid {
            space: space.clone(),
            resolution: resolution.to_vec(),
            spacing,
            points,
            mesh,
            dense_order,
        })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Smallest distance between two distinct samples.
    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &Point {
        &self.points[idx]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Covering radius `h`: the largest distance from a point of the space to
    /// its nearest sample.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn dense_order(&self) -> &[usize] {
        &self.dense_order
    }

    /// Flattened index from per-axis indices.
    pub fn index(&self, multi: &[usize]) -> usize {
        if self.resolution.len() == 1 {
            multi[0]
        } else {
            multi[0] * self.resolution[1] + multi[1]
        }
    }

    /// Per-axis indices of a flattened index.
    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        if self.resolution.len() == 1 {
            [idx, 0]
        } else {
            [idx / self.resolution[1], idx % self.resolution[1]]
        }
    }

    /// Nearest lattice index along one axis, ties to the lower index.
    fn nearest_axis(&self, axis: usize, x: f64) -> usize {
        let n = self.resolution[axis];
        let h = self.spacing[axis];
        let lo = (x / h).floor();
        if self.space.periodic[axis] {
            let lo = (lo as i64).rem_euclid(n as i64) as usize;
            let hi = (lo + 1) % n;
            let coord = |k: usize| k as f64 * h;
            let dlo = self.space.axis_gap(axis, x, coord(lo));
            let dhi = self.space.axis_gap(axis, x, coord(hi));
            if dhi < dlo || (dhi == dlo && hi < lo) {
                hi
            } else {
                lo
            }
        } else {
            let lo = (lo.max(0.0) as usize).min(n - 1);
            let hi = (lo + 1).min(n - 1);
            let coord = |k: usize| self.points[self.axis_probe(axis, k)].coords[axis];
            let dlo = (x - coord(lo)).abs();
            let dhi = (x - coord(hi)).abs();
            if dhi < dlo {
                hi
            } else {
                lo
            }
        }
    }

    fn axis_probe(&self, axis: usize, k: usize) -> usize {
        let mut multi = [0usize; MAX_DIM];
        multi[axis] = k;
        self.index(&multi[..self.resolution.len()])
    }

    /// Index of the sample closest to `p`; ties go to the lowest index.
    pub fn nearest_sample(&self, p: &Point) -> usize {
        let mut multi = [0usize; MAX_DIM];
        for (axis, m) in multi.iter_mut().enumerate().take(self.resolution.len()) {
            *m = self.nearest_axis(axis, p.coords[axis]);
        }
        self.index(&multi[..self.resolution.len()])
    }

    /// Indices of grid-adjacent samples (one step along one axis, forward).
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::with_capacity(self.len() * self.resolution.len());
        for idx in 0..self.len() {
            let multi = self.multi_index(idx);
            for axis in 0..self.resolution.len() {
                let n = self.resolution[axis];
                let next = if multi[axis] + 1 < n {
                    multi[axis] + 1
                } else if self.space.periodic[axis] {
                    0
                } else {
                    continue;
                };
                let mut m = multi;
                m[axis] = next;
                pairs.push((idx, self.index(&m[..self.resolution.len()])));
            }
        }
        pairs
    }
}

/// Bit-reversal (van der Corput) order of `0..n`: enumerate `0..2^b` in
/// reversed-bit order and drop values `≥ n`.
pub fn bit_reversal_order(n: usize) -> Vec<usize> {
    if n <= 1 {
        return (0..n).collect();
    }
    let bits = usize::BITS - (n - 1).leading_zeros();
    (0..(1usize << bits))
        .map(|k| k.reverse_bits() >> (usize::BITS - bits))
        .filter(|&k| k < n)
        .collect()
}

fn dense_order(resolution: &[usize]) -> Vec<usize> {
    if resolution.len() == 1 {
        return bit_reversal_order(resolution[0]);
    }
    let rank = |n: usize| {
        let mut r = vec![0usize; n];
        for (pos, k) in bit_reversal_order(n).into_iter().enumerate() {
            r[k] = pos;
        }
        r
    };
    let (rx, ry) = (rank(resolution[0]), rank(resolution[1]));
    let level = |r: usize| (usize::BITS - r.leading_zeros()) as usize;
    let mut order: Vec<usize> = (0..resolution[0] * resolution[1]).collect();
    // Each level closes a full sub-lattice of the previous one refined once.
    order.sort_by_key(|&idx| {
        let (i, j) = (idx / resolution[1], idx % resolution[1]);
        (level(rx[i].max(ry[j])), rx[i], ry[j])
    });
    order
}

/// Free-function form of [`SampleGrid::build`].
pub fn build_grid(space: &SpaceDescriptor, resolution: &[usize]) -> Result<SampleGrid> {
    SampleGrid::build(space, resolution)
}

/// Free-function form of [`SampleGrid::nearest_sample`].
pub fn nearest_sample(grid: &SampleGrid, p: &Point) -> usize {
    grid.nearest_sample(p)
}

/// Free-function form of [`SampleGrid::dense_order`].
pub fn dense_enumeration(grid: &SampleGrid) -> Vec<usize> {
    grid.dense_order().to_vec()
}
