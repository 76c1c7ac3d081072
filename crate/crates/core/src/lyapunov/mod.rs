//! The explicit Lyapunov construction `u_T → ũ_T → ū_T → u` and its verifiers.

mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaincost::ChainCostTable;
use crate::error::{Error, Result};
use crate::flow::{FlowImageTable, LipschitzEnvelope};
use crate::space::SampleGrid;

pub use verify::{
    check_dominated, check_lipschitz, component_constancy, distance_to_set, duality_check, neutral_set,
    scr_cr_compare, verify_lyapunov, ComponentReport, DualityReport, ScrCrComparison, VerificationReport,
};

pub const DEFAULT_J_MAX: usize = 48;
pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_S_MAX: f64 = 12.0;
pub const DEFAULT_DS: f64 = 0.125;
pub const DEFAULT_S_COUNT: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    #[serde(rename = "uT")]
    UT,
    #[serde(rename = "uTtilde")]
    UTTilde,
    #[serde(rename = "uTbar")]
    UTBar,
    #[serde(rename = "u")]
    U,
    #[serde(rename = "user")]
    User,
}

/// Parameters a field was built with, and the analytic error bounds that
/// come with them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub t: Option<f64>,
    pub j_max: Option<usize>,
    pub s_count: Option<usize>,
    pub s_max: Option<f64>,
    pub ds: Option<f64>,
    pub n_max: Option<usize>,
    pub m_t: Option<f64>,
    /// Bound on the dropped tail of the truncated sum or integral.
    pub tail_bound: f64,
    /// Bound on the error of nearest-sample interpolation at this stage.
    pub interpolation_slack: f64,
}

/// One value per grid sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub kind: FieldKind,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl ScalarField {
    pub fn user(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("field value at sample {i} is not finite")));
        }
        Ok(ScalarField { kind: FieldKind::User, values, provenance: Provenance::default() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }
}

/// `u_T(p) = Σ_j 2^{-j} min(L_T(x_j, p), 2 diam)` over the given source
/// tables, which must come from the first `j_max` samples of the dense order.
/// Values beyond the budget count as `2 diam`.
pub fn build_ut(grid: &SampleGrid, tables: &[ChainCostTable], j_max: usize) -> Result<ScalarField> {
    if j_max == 0 || tables.len() < j_max {
        return Err(Error::Config(format!("u_T needs {j_max} source tables, got {}", tables.len())));
    }
    let order = grid.dense_order();
    for (j, t) in tables.iter().take(j_max).enumerate() {
        if t.source != order[j] || t.values.len() != grid.len() {
            return Err(Error::Config(format!("table {j} does not match dense-order source {}", order[j])));
        }
    }
    let cap = 2.0 * grid.space().diameter();
    let mut values = vec![0.0; grid.len()];
    let mut weight = 1.0;
    for t in tables.iter().take(j_max) {
        weight *= 0.5;
        for (v, &l) in values.iter_mut().zip(&t.values) {
            *v += weight * l.min(cap);
        }
    }
    Ok(ScalarField {
        kind: FieldKind::UT,
        values,
        provenance: Provenance {
            t: tables[0].t_min,
            j_max: Some(j_max),
            tail_bound: 0.5f64.powi(j_max as i32) * cap,
            interpolation_slack: 2.0 * grid.mesh(),
            ..Default::default()
        },
    })
}

/// `ũ_T(p) = max_k u_T(nearest(φ_{s_k}(p)))` for `s_k = kT/(s_count−1)`.
pub fn build_ut_tilde(ut: &ScalarField, grid: &SampleGrid, table: &FlowImageTable, t: f64, s_count: usize, m_t: f64) -> Result<ScalarField> {
    if s_count < 2 {
        return Err(Error::Config("ũ_T needs at least two s values".into()));
    }
    check_len(ut, grid)?;
    let idx = (0..s_count)
        .map(|k| table.require_time(t * k as f64 / (s_count - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|p| idx.iter().map(|&k| ut.values[table.nearest(p, k)]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(ScalarField {
        kind: FieldKind::UTTilde,
        values,
        provenance: Provenance {
            t: Some(t),
            j_max: ut.provenance.j_max,
            s_count: Some(s_count),
            m_t: Some(m_t),
            tail_bound: ut.provenance.tail_bound,
            interpolation_slack: 2.0 * m_t * grid.mesh(),
            ..Default::default()
        },
    })
}

/// Weights `w_i` with `∫_0^{s_max} e^{-s} g(s) ds = Σ w_i g(s_i)` for every
/// `g` linear between the nodes `s_i = i·ds`. Nonnegative, summing to
/// `1 − e^{-s_max}`.
pub fn exp_quadrature_weights(s_max: f64, ds: f64) -> Result<Vec<f64>> {
    if !(ds > 0.0) || !(s_max > 0.0) {
        return Err(Error::Config("s_max and ds must be positive".into()));
    }
    let n = (s_max / ds).round() as usize;
    if ((n as f64) * ds - s_max).abs() > 1e-9 {
        return Err(Error::Config(format!("s_max = {s_max} is not a multiple of ds = {ds}")));
    }
    let mut w = vec![0.0; n + 1];
    // ∫_0^ds e^{-τ} dτ and ∫_0^ds e^{-τ} τ/ds dτ
    let e0 = -(-ds).exp_m1();
    let e1 = (1.0 - (-ds).exp() * (1.0 + ds)) / ds;
    for i in 0..n {
        let a = (-(i as f64) * ds).exp();
        w[i] += a * (e0 - e1);
        w[i + 1] += a * e1;
    }
    Ok(w)
}

/// `ū_T(p) = (1/M_T) ∫_0^{s_max} e^{-s}/M_s · ũ_T(φ_s(p)) ds`, integrating the
/// exponential exactly against the piecewise-linear interpolant of the
/// remaining factor on the `ds` grid.
pub fn build_ut_bar(
    ut_tilde: &ScalarField,
    grid: &SampleGrid,
    table: &FlowImageTable,
    envelope: &LipschitzEnvelope,
    t: f64,
    s_max: f64,
    ds: f64,
) -> Result<ScalarField> {
    check_len(ut_tilde, grid)?;
    if envelope.max_s() + 1e-9 < s_max {
        return Err(Error::Config(format!(
            "Lipschitz envelope covers s ≤ {} but s_max = {s_max}",
            envelope.max_s()
        )));
    }
    let w = exp_quadrature_weights(s_max, ds)?;
    let m_t = envelope.at(t)?;
    let nodes = (0..w.len())
        .map(|i| {
            let s = i as f64 * ds;
            Ok((table.require_time(s)?, w[i] / envelope.at(s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|p| nodes.iter().map(|&(k, c)| c * ut_tilde.values[table.nearest(p, k)]).sum::<f64>() / m_t)
        .collect();
    let max_abs = ut_tilde.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(ScalarField {
        kind: FieldKind::UTBar,
        values,
        provenance: Provenance {
            t: Some(t),
            j_max: ut_tilde.provenance.j_max,
            s_count: ut_tilde.provenance.s_count,
            s_max: Some(s_max),
            ds: Some(ds),
            m_t: Some(m_t),
            tail_bound: (-s_max).exp() * max_abs + ut_tilde.provenance.tail_bound,
            interpolation_slack: 2.0 * grid.mesh(),
            ..Default::default()
        },
    })
}

/// Exact pointwise bounds of [`build_ut_bar`] in terms of `ũ_T`:
/// `min ũ · Σ_i w_i/M_{s_i} / M_T ≤ ū_T ≤ max ũ · Σ_i w_i/M_{s_i} / M_T`.
pub fn ut_bar_bounds(ut_tilde: &ScalarField, envelope: &LipschitzEnvelope, t: f64, s_max: f64, ds: f64) -> Result<(f64, f64)> {
    let w = exp_quadrature_weights(s_max, ds)?;
    let mut mass = 0.0;
    for (i, wi) in w.iter().enumerate() {
        mass += wi / envelope.at(i as f64 * ds)?;
    }
    let m_t = envelope.at(t)?;
    Ok((ut_tilde.min() * mass / m_t, ut_tilde.max() * mass / m_t))
}

/// `u = Σ_n 2^{-n} ū_n`, the fields given in order `n = 1, 2, …`.
pub fn build_u(bars: &[ScalarField]) -> Result<ScalarField> {
    let first = bars.first().ok_or_else(|| Error::Config("u needs at least one ū_n".into()))?;
    if bars.iter().any(|b| b.len() != first.len()) {
        return Err(Error::Config("ū_n fields live on different grids".into()));
    }
    let mut values = vec![0.0; first.len()];
    let mut weight = 1.0;
    let mut max_abs = 0.0f64;
    for b in bars {
        weight *= 0.5;
        for (v, x) in values.iter_mut().zip(&b.values) {
            *v += weight * x;
        }
        max_abs = max_abs.max(b.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    let tails: f64 = bars.iter().enumerate().map(|(n, b)| 0.5f64.powi(n as i32 + 1) * b.provenance.tail_bound).sum();
    Ok(ScalarField {
        kind: FieldKind::U,
        values,
        provenance: Provenance {
            j_max: first.provenance.j_max,
            s_count: first.provenance.s_count,
            s_max: first.provenance.s_max,
            ds: first.provenance.ds,
            n_max: Some(bars.len()),
            tail_bound: 0.5f64.powi(bars.len() as i32) * max_abs + tails,
            interpolation_slack: 2.0 * first.provenance.interpolation_slack,
            ..Default::default()
        },
    })
}

fn check_len(field: &ScalarField, grid: &SampleGrid) -> Result<()> {
    if field.len() != grid.len() {
        return Err(Error::Config(format!("field has {} values for {} samples", field.len(), grid.len())));
    }
    Ok(())
}
