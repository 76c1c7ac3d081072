//! Transition graphs, the discrete chain cost `L_T`, recurrence sets and
//! strong chain transitive components.

mod dijkstra;
mod graph;
mod sets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dijkstra::{
    chain_cost, chain_cost_bounded, full_cost_matrix, reachable_within, recurrence_value, recurrence_value_with, recurrence_values,
    sources_cost_tables, ChainCostTable, Workspace, FULL_MATRIX_GUARD,
};
pub use graph::{GraphStats, TransitionGraph};
pub use sets::{
    a_t_from_values, a_t_set, component_count, cr_estimate, intersect, resolution_warning, scr_estimate,
    strongly_connected_components, transitive_components, RecurrenceReport,
};

/// Default number of chain-step durations per `[T, 2T]`.
pub const DEFAULT_TIME_STEPS: usize = 9;

/// Admissible chain-step durations for one minimal time `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_min: f64,
    steps: Vec<f64>,
}

impl TimeGrid {
    /// `count` equally spaced durations from `T` to `2T`, both included.
    pub fn uniform(t_min: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0) || !t_min.is_finite() {
            return Err(Error::Config(format!("T = {t_min} must be positive")));
        }
        if count < 2 {
            return Err(Error::Config(format!("time grid needs at least 2 steps, got {count}")));
        }
        let steps = (0..count).map(|k| t_min + t_min * k as f64 / (count - 1) as f64).collect();
        Ok(TimeGrid { t_min, steps })
    }

    pub fn from_steps(t_min: f64, mut steps: Vec<f64>) -> Result<Self> {
        steps.sort_by(f64::total_cmp);
        if !(t_min > 0.0) || steps.is_empty() || steps[0] < t_min || steps[steps.len() - 1] > 2.0 * t_min {
            return Err(Error::Config(format!("time steps must lie in [{t_min}, {}]", 2.0 * t_min)));
        }
        Ok(TimeGrid { t_min, steps })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }
}
