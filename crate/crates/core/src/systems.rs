//! Builtin systems with known recurrence structure.
//!
//! The two circle systems are concrete smooth realizations of flows with two
//! fixed arcs, `[1/4, 1/2]` and `[3/4, 1]`, joined by moving arcs driven by
//! the bump `b(x) = (1 − cos 8πx)/2` on `[0, 1/4]`. In `circle_fig1` the moving
//! arcs flow towards the same fixed arc from both sides, so every chain that
//! leaves a fixed arc is trapped; in `circle_fig2` both moving arcs flow in
//! the positive direction and the circle is chain recurrent while only the
//! fixed arcs are strongly chain recurrent.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::VectorFieldSpec;
use crate::space::{Point, SampleGrid, SpaceDescriptor, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    CircleRotation,
    CircleZero,
    CircleFig1,
    CircleFig2,
    TorusExample42,
    BoxGradient,
}

impl SystemId {
    pub const ALL: [SystemId; 6] = [
        SystemId::CircleRotation,
        SystemId::CircleZero,
        SystemId::CircleFig1,
        SystemId::CircleFig2,
        SystemId::TorusExample42,
        SystemId::BoxGradient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SystemId::CircleRotation => "circle_rotation",
            SystemId::CircleZero => "circle_zero",
            SystemId::CircleFig1 => "circle_fig1",
            SystemId::CircleFig2 => "circle_fig2",
            SystemId::TorusExample42 => "torus_example42",
            SystemId::BoxGradient => "box_gradient",
        }
    }

    pub fn space(&self) -> SpaceDescriptor {
        match self {
            SystemId::TorusExample42 => SpaceDescriptor::torus2(1.0, 1.0),
            SystemId::BoxGradient => SpaceDescriptor::cuboid(vec![1.0]),
            _ => SpaceDescriptor::circle(1.0),
        }
        .expect("builtin spaces are valid")
    }

    /// Evaluate the vector field at canonical coordinates.
    pub fn eval(&self, x: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        match self {
            SystemId::CircleRotation => [1.0, 0.0],
            SystemId::CircleZero => [0.0, 0.0],
            SystemId::CircleFig1 => [fig_field(x[0], -1.0), 0.0],
            SystemId::CircleFig2 => [fig_field(x[0], 1.0), 0.0],
            SystemId::TorusExample42 => [example42_f(x[0]), 1.0],
            SystemId::BoxGradient => [-(x[0] - 0.5), 0.0],
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown system id `{s}`")))
    }
}

/// `b(x) = (1 − cos 8πx)/2` on `[0, 1/4]`, zero elsewhere.
pub fn bump(x: f64) -> f64 {
    if (0.0..=0.25).contains(&x) {
        (1.0 - (8.0 * PI * x).cos()) / 2.0
    } else {
        0.0
    }
}

fn fig_field(x: f64, second_arc_sign: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    if x <= 0.25 {
        bump(x)
    } else if (0.5..=0.75).contains(&x) {
        second_arc_sign * bump(x - 0.5)
    } else {
        0.0
    }
}

/// First component of the torus field `V(x, y) = (f(x), 1)`.
pub fn example42_f(x: f64) -> f64 {
    let x = x.rem_euclid(1.0);
    if (0.25..=0.75).contains(&x) {
        0.0
    } else {
        (4.0 * PI * x).cos() + 1.0
    }
}

/// Analytic description of a set of the space, used for ground truths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetPredicate {
    All,
    /// `[1/4, 1/2] ∪ [3/4, 1]` on the unit circle.
    FixedArcs,
    /// `[lo, hi] × T¹` on the unit torus.
    Band { lo: f64, hi: f64 },
    /// A single point of a 1-D space.
    Singleton { at: f64 },
}

impl SetPredicate {
    pub fn contains(&self, p: &Point) -> bool {
        let x = p.x();
        match *self {
            SetPredicate::All => true,
            SetPredicate::FixedArcs => (0.25..=0.5).contains(&x) || x >= 0.75 || x == 0.0,
            SetPredicate::Band { lo, hi } => (lo..=hi).contains(&x),
            SetPredicate::Singleton { at } => (x - at).abs() < 1e-12,
        }
    }

    /// Distance from `p` to the topological boundary of the set (along `x`).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        let x = p.x();
        let wrapped = |a: f64| {
            let d = (x - a).abs();
            d.min(1.0 - d)
        };
        match *self {
            SetPredicate::All => f64::INFINITY,
            SetPredicate::FixedArcs => [0.0, 0.25, 0.5, 0.75]
                .iter()
                .map(|&a| wrapped(a))
                .fold(f64::INFINITY, f64::min),
            SetPredicate::Band { lo, hi } => wrapped(lo).min(wrapped(hi)),
            SetPredicate::Singleton { at } => (x - at).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentExpectation {
    /// A single strong chain transitive component.
    One,
    /// Every strongly chain recurrent point is its own component.
    Singletons,
    /// One component per periodic orbit `{x} × T¹` of a vertical flow.
    Columns,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scr: SetPredicate,
    pub cr: SetPredicate,
    pub components: ComponentExpectation,
}

#[derive(Clone, Debug)]
pub struct BuiltinSystem {
    pub id: SystemId,
    pub space: SpaceDescriptor,
    pub field: VectorFieldSpec,
    pub ground_truth: GroundTruth,
}

pub fn instantiate(id: SystemId) -> BuiltinSystem {
    use ComponentExpectation::*;
    use SetPredicate::*;
    let band = Band { lo: 0.25, hi: 0.75 };
    let (scr, cr, components) = match id {
        SystemId::CircleRotation => (All, All, One),
        SystemId::CircleZero => (All, All, Singletons),
        SystemId::CircleFig1 => (FixedArcs, FixedArcs, Singletons),
        SystemId::CircleFig2 => (FixedArcs, All, Singletons),
        SystemId::TorusExample42 => (band, All, Columns),
        SystemId::BoxGradient => (Singleton { at: 0.5 }, Singleton { at: 0.5 }, One),
    };
    BuiltinSystem {
        id,
        space: id.space(),
        field: VectorFieldSpec::Builtin { system: id },
        ground_truth: GroundTruth { scr, cr, components },
    }
}

/// Expected membership of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    In,
    Out,
    DontCare,
}

impl Expected {
    pub fn agrees(&self, computed: bool) -> bool {
        match self {
            Expected::In => computed,
            Expected::Out => !computed,
            Expected::DontCare => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundTruthBitmaps {
    pub scr: Vec<Expected>,
    pub cr: Vec<Expected>,
    pub dont_care_width: f64,
}

impl GroundTruthBitmaps {
    /// Number of samples where `computed` contradicts a definite expectation.
    pub fn mismatches(expected: &[Expected], computed: &[bool]) -> Vec<usize> {
        expected
            .iter()
            .zip(computed)
            .enumerate()
            .filter(|(_, (e, c))| !e.agrees(**c))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-sample expected SCR and CR membership; samples within
/// `dont_care_width` of a set boundary are marked [`Expected::DontCare`].
pub fn ground_truth_bitmap(system: &BuiltinSystem, grid: &SampleGrid, dont_care_width: f64) -> GroundTruthBitmaps {
    let classify = |pred: &SetPredicate| -> Vec<Expected> {
        grid.points()
            .iter()
            .map(|p| {
                if pred.boundary_distance(p) <= dont_care_width {
                    Expected::DontCare
                } else if pred.contains(p) {
                    Expected::In
                } else {
                    Expected::Out
                }
            })
            .collect()
    };
    GroundTruthBitmaps {
        scr: classify(&system.ground_truth.scr),
        cr: classify(&system.ground_truth.cr),
        dont_care_width,
    }
}
