//! Run configuration: one JSON document, every field optional with a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{VectorFieldSpec, DEFAULT_DT};
use crate::space::SpaceDescriptor;
use crate::systems::SystemId;

/// A user-supplied flow in place of a builtin system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineField {
    pub space: SpaceDescriptor,
    pub field: VectorFieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemId>,
    pub field: Option<InlineField>,
    /// Samples per axis; one entry is repeated over all axes.
    pub resolution: Vec<usize>,
    /// Minimal flow times `T` for the `A_T` estimates.
    pub t_list: Vec<f64>,
    /// Chain-step durations per `[T, 2T]`.
    pub time_steps: usize,
    /// Membership threshold `ε = κh`.
    pub kappa: f64,
    /// Per-jump threshold of the CR estimate, in units of `h`.
    pub kappa_cr: f64,
    /// Reachability threshold for transitive components, in units of `h`.
    pub kappa_component: f64,
    /// Minimal flow time of the CR graph; defaults to the smallest `T`.
    pub cr_t: Option<f64>,
    pub cr_time_steps: usize,
    /// Chain-step durations per `[n, 2n]` in the `u_T` graphs; `None` picks
    /// enough steps to move at most one cell per step, within a work cap.
    pub lyap_time_steps: Option<usize>,
    /// Edge budget `B = max(ε, budget_factor·h)`.
    pub budget_factor: f64,
    /// Neutral-set tolerance; defaults to `h·(1 + Lip(u))`.
    pub eta: Option<f64>,
    pub j_max: usize,
    pub n_max: usize,
    pub s_max: f64,
    pub ds: f64,
    pub s_count: usize,
    pub dt: f64,
    pub lipschitz_pairs: usize,
    pub lipschitz_safety: f64,
    pub seed: u64,
    pub probe_times: Vec<f64>,
    pub verify_times: Vec<f64>,
    pub margin_time: f64,
    /// Width of the don't-care band around ground-truth boundaries, in cells.
    pub dont_care_cells: f64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: None,
            field: None,
            resolution: Vec::new(),
            t_list: vec![0.5, 1.0, 2.0],
            time_steps: 9,
            kappa: 4.0,
            kappa_cr: 2.0,
            kappa_component: 1.0,
            cr_t: None,
            cr_time_steps: 129,
            lyap_time_steps: None,
            budget_factor: 16.0,
            eta: None,
            j_max: 48,
            n_max: 6,
            s_max: 12.0,
            ds: 0.125,
            s_count: 9,
            dt: DEFAULT_DT,
            lipschitz_pairs: 1000,
            lipschitz_safety: 1.25,
            seed: 7,
            probe_times: vec![0.5, 1.0, 2.0],
            verify_times: vec![0.25, 0.5, 1.0, 2.0],
            margin_time: 1.0,
            dont_care_cells: 2.0,
            output_dir: PathBuf::from("out"),
            threads: None,
        }
    }
}

fn default_resolution(space: &SpaceDescriptor) -> usize {
    if space.dim() == 1 {
        256
    } else {
        64
    }
}

impl RunConfig {
    pub fn for_system(system: SystemId) -> Self {
        RunConfig { system: Some(system), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The space and vector field the run uses.
    pub fn flow_spec(&self) -> Result<(SpaceDescriptor, VectorFieldSpec)> {
        match (&self.system, &self.field) {
            (Some(id), None) => Ok((id.space(), VectorFieldSpec::Builtin { system: *id })),
            (None, Some(f)) => {
                f.space.validate()?;
                f.field.validate(&f.space)?;
                Ok((f.space.clone(), f.field.clone()))
            }
            (Some(_), Some(_)) => Err(Error::Config("give either `system` or `field`, not both".into())),
            (None, None) => Err(Error::Config("a `system` id or an inline `field` is required".into())),
        }
    }

    /// Copy with every defaulted quantity filled in and all values checked.
    pub fn resolved(&self) -> Result<Self> {
        let (space, _) = self.flow_spec()?;
        let mut c = self.clone();
        let dim = space.dim();
        c.resolution = match c.resolution.len() {
            0 => vec![default_resolution(&space); dim],
            1 => vec![c.resolution[0]; dim],
            n if n == dim => c.resolution,
            n => return Err(Error::Config(format!("resolution has {n} entries for a {dim}-D space"))),
        };
        if c.cr_t.is_none() {
            c.cr_t = c.t_list.first().copied();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("kappa_cr", self.kappa_cr),
            ("kappa_component", self.kappa_component),
            ("budget_factor", self.budget_factor),
            ("s_max", self.s_max),
            ("ds", self.ds),
            ("dt", self.dt),
            ("lipschitz_safety", self.lipschitz_safety),
            ("margin_time", self.margin_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if self.dont_care_cells < 0.0 {
            return Err(Error::Config("`dont_care_cells` must be nonnegative".into()));
        }
        for (name, v) in [("time_steps", self.time_steps), ("cr_time_steps", self.cr_time_steps), ("s_count", self.s_count)] {
            if v < 2 {
                return Err(Error::Config(format!("`{name}` must be at least 2")));
            }
        }
        if self.lyap_time_steps.is_some_and(|s| s < 2) {
            return Err(Error::Config("`lyap_time_steps` must be at least 2".into()));
        }
        if self.j_max == 0 || self.n_max == 0 || self.lipschitz_pairs == 0 {
            return Err(Error::Config("`j_max`, `n_max` and `lipschitz_pairs` must be positive".into()));
        }
        if self.t_list.len() < 2 {
            return Err(Error::Config("`t_list` needs at least two values".into()));
        }
        if self.t_list.iter().any(|t| !(*t > 0.0)) || self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("`t_list` must be positive and strictly ascending".into()));
        }
        if let Some(t) = self.cr_t {
            if !(t > 0.0) {
                return Err(Error::Config("`cr_t` must be positive".into()));
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0) {
                return Err(Error::Config("`eta` must be positive".into()));
            }
        }
        for (name, list) in [("probe_times", &self.probe_times), ("verify_times", &self.verify_times)] {
            if list.is_empty() || list.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Config(format!("`{name}` must be nonempty and positive")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("`threads` must be positive".into()));
        }
        if self.resolution.iter().any(|&r| r < crate::space::MIN_RESOLUTION) {
            return Err(Error::Config(format!("resolution below {}", crate::space::MIN_RESOLUTION)));
        }
        Ok(())
    }
}
