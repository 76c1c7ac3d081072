//! End-to-end runs: recurrence sets and components, then the Lyapunov
//! construction with its verification.

use serde::Serialize;

use crate::chaincost::{
    a_t_from_values, cr_estimate, intersect, recurrence_values, resolution_warning, sources_cost_tables,
    transitive_components, GraphStats, RecurrenceReport, TimeGrid, TransitionGraph,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{
    estimate_lipschitz_from_table, flow_image_table, lipschitz_pairs, merge_times, FlowImageTable, FlowMap,
    LipschitzEnvelope,
};
use crate::lyapunov::{
    build_u, build_ut, build_ut_bar, build_ut_tilde, check_dominated, check_lipschitz, component_constancy, scr_cr_compare,
    ut_bar_bounds, verify_lyapunov, ComponentReport, ScalarField, ScrCrComparison, VerificationReport,
};
use crate::space::{build_grid, SampleGrid};
use crate::systems::{ground_truth_bitmap, instantiate, BuiltinSystem, ComponentExpectation, GroundTruthBitmaps};

/// Bound on `samples² · steps` when choosing Lyapunov time steps automatically.
pub const LYAPUNOV_STEP_WORK: usize = 1 << 28;

/// Largest grid accepted by the Lyapunov pipeline, whose cost graphs are dense.
pub const DENSE_NODE_GUARD: usize = 8192;

/// Grid, flow and resolved configuration of one run.
pub struct Prepared {
    pub config: RunConfig,
    pub system: Option<BuiltinSystem>,
    pub map: FlowMap,
    pub grid: SampleGrid,
}

impl Prepared {
    pub fn mesh(&self) -> f64 {
        self.grid.mesh()
    }

    pub fn epsilon(&self) -> f64 {
        self.config.kappa * self.mesh()
    }

    pub fn budget(&self) -> f64 {
        (self.config.budget_factor * self.mesh()).max(self.epsilon())
    }

    pub fn time_grids(&self) -> Result<Vec<TimeGrid>> {
        self.config.t_list.iter().map(|&t| TimeGrid::uniform(t, self.config.time_steps)).collect()
    }

    /// The two windows `[T_cr, 2T_cr]` and `[2T_cr, 4T_cr]` of the CR graph.
    pub fn cr_time_grids(&self) -> Result<Vec<TimeGrid>> {
        let t = self.config.cr_t.expect("resolved config");
        [t, 2.0 * t].iter().map(|&t| TimeGrid::uniform(t, self.config.cr_time_steps)).collect()
    }

    /// Chain-step durations of the `u_T` graph for `T = n`.
    ///
    /// Steps of a few dyadic durations alias with the grid (a unit rotation
    /// only ever lands on every eighth sample), so by default the step count
    /// grows until one step moves the fastest sample at most one cell.
    pub fn lyapunov_time_grid(&self, n: usize) -> Result<TimeGrid> {
        let c = &self.config;
        let steps = match c.lyap_time_steps {
            Some(s) => s,
            None => {
                let cell = self.grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
                let wanted = (n as f64 * self.max_speed() / cell).ceil() as usize + 1;
                let nodes = self.grid.len();
                let cap = LYAPUNOV_STEP_WORK / (nodes * nodes).max(1);
                wanted.min(cap).max(c.time_steps)
            }
        };
        TimeGrid::uniform(n as f64, steps)
    }

    fn max_speed(&self) -> f64 {
        self.grid
            .points()
            .iter()
            .map(|p| self.map.velocity(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn recurrence_times(&self) -> Result<Vec<f64>> {
        let mut all = vec![0.0];
        for g in self.time_grids()?.iter().chain(self.cr_time_grids()?.iter()) {
            all.extend_from_slice(g.steps());
        }
        Ok(all)
    }

    fn lyapunov_times(&self) -> Result<Vec<f64>> {
        let c = &self.config;
        let mut all = self.recurrence_times()?;
        for n in 1..=c.n_max {
            all.extend_from_slice(self.lyapunov_time_grid(n)?.steps());
            all.extend((0..c.s_count).map(|k| n as f64 * k as f64 / (c.s_count - 1) as f64));
        }
        all.extend(self.s_values());
        all.extend_from_slice(&c.probe_times);
        all.extend_from_slice(&c.verify_times);
        all.push(c.margin_time);
        Ok(all)
    }

    pub fn s_values(&self) -> Vec<f64> {
        let n = (self.config.s_max / self.config.ds).round() as usize;
        (0..=n).map(|i| i as f64 * self.config.ds).collect()
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let config = config.resolved()?;
    let (space, field) = config.flow_spec()?;
    let map = FlowMap::new(space.clone(), field, config.dt)?;
    let grid = build_grid(&space, &config.resolution)?;
    Ok(Prepared { system: config.system.map(instantiate), config, map, grid })
}

/// Agreement of the computed sets with a builtin system's ground truth.
#[derive(Clone, Debug, Serialize)]
pub struct GroundTruthSummary {
    pub dont_care_width: f64,
    pub scr_mismatches: usize,
    pub cr_mismatches: usize,
    pub scr_mismatch_samples: Vec<usize>,
    pub cr_mismatch_samples: Vec<usize>,
    pub expected_components: ComponentExpectation,
}

pub struct RecurrenceRun {
    pub prepared: Prepared,
    pub table: FlowImageTable,
    pub graphs: Vec<TransitionGraph>,
    pub report: RecurrenceReport,
    pub ground_truth: Option<GroundTruthSummary>,
}

pub fn run_recurrence(config: &RunConfig) -> Result<RecurrenceRun> {
    let prepared = prepare(config)?;
    let table = flow_image_table(&prepared.map, &prepared.grid, &merge_times(prepared.recurrence_times()?))?;
    recurrence_on_table(prepared, table)
}

fn recurrence_on_table(prepared: Prepared, table: FlowImageTable) -> Result<RecurrenceRun> {
    let grid = &prepared.grid;
    let c = &prepared.config;
    let h = prepared.mesh();
    let eps = prepared.epsilon();
    let budget = prepared.budget();
    let mut graphs = Vec::new();
    let mut recurrence = Vec::new();
    let mut a_t = Vec::new();
    let mut graph_stats: Vec<GraphStats> = Vec::new();
    for tg in prepared.time_grids()? {
        let g = TransitionGraph::build(grid, &table, &tg, budget)?;
        let r = recurrence_values(&g);
        a_t.push(a_t_from_values(&r, eps));
        recurrence.push(r);
        graph_stats.push(g.stats());
        graphs.push(g);
    }
    let scr = intersect(&a_t);

    let eps_cr = c.kappa_cr * h;
    let cr_graphs = prepared
        .cr_time_grids()?
        .iter()
        .map(|tg| TransitionGraph::build(grid, &table, tg, eps_cr))
        .collect::<Result<Vec<_>>>()?;
    let cr_graph = TransitionGraph::merge_min(&cr_graphs)?;
    graph_stats.push(cr_graph.stats());
    let cr = cr_estimate(&cr_graph, eps_cr);

    // The fine CR time grid avoids aliasing between dyadic steps and the grid.
    let eps_comp = c.kappa_component * h;
    let components = transitive_components(std::slice::from_ref(&cr_graph), &scr, eps_comp);

    let mut warnings = Vec::new();
    let speeds: Vec<f64> = grid
        .points()
        .iter()
        .map(|p| prepared.map.velocity(p).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(w) = resolution_warning(grid, &table, &speeds, c.t_list[0], eps)? {
        warnings.push(w);
    }
    let outside = scr.iter().zip(&cr).filter(|(s, c)| **s && !**c).count();
    if outside > 0 {
        warnings.push(format!("{outside} SCR samples fall outside the CR estimate"));
    }

    let report = RecurrenceReport {
        t_values: c.t_list.clone(),
        recurrence,
        a_t,
        scr,
        cr,
        cr_t: c.cr_t.expect("resolved config"),
        components,
        epsilon: eps,
        epsilon_component: eps_comp,
        budget,
        graph_stats,
        warnings,
    };
    let ground_truth = prepared.system.as_ref().map(|sys| {
        let width = c.dont_care_cells * grid.spacing().iter().cloned().fold(0.0, f64::max);
        let gt = ground_truth_bitmap(sys, grid, width);
        let scr_m = GroundTruthBitmaps::mismatches(&gt.scr, &report.scr);
        let cr_m = GroundTruthBitmaps::mismatches(&gt.cr, &report.cr);
        GroundTruthSummary {
            dont_care_width: width,
            scr_mismatches: scr_m.len(),
            cr_mismatches: cr_m.len(),
            scr_mismatch_samples: scr_m,
            cr_mismatch_samples: cr_m,
            expected_components: sys.ground_truth.components,
        }
    });
    Ok(RecurrenceRun { prepared, table, graphs, report, ground_truth })
}

/// Summary of one `T = n` stage of the construction.
#[derive(Clone, Debug, Serialize)]
pub struct StageSummary {
    pub t: f64,
    pub time_steps: usize,
    pub m_t: f64,
    pub sources: usize,
    pub ut_range: (f64, f64),
    pub ut_tilde_range: (f64, f64),
    pub ut_bar_range: (f64, f64),
    /// Exact bounds on `ū_T` implied by the range of `ũ_T`.
    pub ut_bar_bounds: (f64, f64),
    pub lipschitz_ut: f64,
    pub lipschitz_ut_tilde: f64,
    pub lipschitz_ut_bar: f64,
    pub tail_bound: f64,
}

pub struct LyapunovRun {
    pub recurrence: RecurrenceRun,
    pub envelope: LipschitzEnvelope,
    pub pairs: Vec<(usize, usize)>,
    pub stages: Vec<StageSummary>,
    pub ut_fields: Vec<ScalarField>,
    pub u: ScalarField,
    pub lipschitz_u: f64,
    pub eta: f64,
    pub verification: VerificationReport,
    pub components: ComponentReport,
    pub comparison: ScrCrComparison,
}

pub fn run_lyapunov(config: &RunConfig) -> Result<LyapunovRun> {
    let prepared = prepare(config)?;
    let n = prepared.grid.len();
    if n > DENSE_NODE_GUARD {
        return Err(Error::Guard(format!(
            "the Lyapunov pipeline builds dense cost graphs; {n} samples exceed the limit of {DENSE_NODE_GUARD}"
        )));
    }
    let table = flow_image_table(&prepared.map, &prepared.grid, &merge_times(prepared.lyapunov_times()?))?;
    let recurrence = recurrence_on_table(prepared, table)?;
    let prepared = &recurrence.prepared;
    let table = &recurrence.table;
    let grid = &prepared.grid;
    let c = &prepared.config;
    let h = prepared.mesh();

    let pairs = lipschitz_pairs(grid, c.lipschitz_pairs, c.seed);
    let envelope = estimate_lipschitz_from_table(table, grid, &prepared.s_values(), &pairs, c.lipschitz_safety)?;

    let dense_budget = 2.0 * grid.space().diameter();
    let j = c.j_max.min(n);
    let sources = grid.dense_order()[..j].to_vec();
    let mut stages = Vec::new();
    let mut bars = Vec::new();
    let mut ut_fields = Vec::new();
    for k in 1..=c.n_max {
        let t = k as f64;
        let tg = prepared.lyapunov_time_grid(k)?;
        let graph = TransitionGraph::build(grid, table, &tg, dense_budget)?;
        let tables = sources_cost_tables(&graph, &sources, None);
        drop(graph);
        let ut = build_ut(grid, &tables, j)?;
        let m_t = envelope.at(t)?;
        let tilde = build_ut_tilde(&ut, grid, table, t, c.s_count, m_t)?;
        let bar = build_ut_bar(&tilde, grid, table, &envelope, t, c.s_max, c.ds)?;
        stages.push(StageSummary {
            t,
            time_steps: tg.steps().len(),
            m_t,
            sources: j,
            ut_range: (ut.min(), ut.max()),
            ut_tilde_range: (tilde.min(), tilde.max()),
            ut_bar_range: (bar.min(), bar.max()),
            ut_bar_bounds: ut_bar_bounds(&tilde, &envelope, t, c.s_max, c.ds)?,
            lipschitz_ut: check_lipschitz(&ut, grid, &pairs),
            lipschitz_ut_tilde: check_lipschitz(&tilde, grid, &pairs),
            lipschitz_ut_bar: check_lipschitz(&bar, grid, &pairs),
            tail_bound: bar.provenance.tail_bound,
        });
        ut_fields.push(ut);
        bars.push(bar);
    }
    let u = build_u(&bars)?;
    let lipschitz_u = check_lipschitz(&u, grid, &pairs);
    let eta = c.eta.unwrap_or(h * (1.0 + lipschitz_u));
    let report = &recurrence.report;
    let verification = verify_lyapunov(
        &u,
        grid,
        table,
        &c.verify_times,
        &c.probe_times,
        c.margin_time,
        &report.scr,
        eta,
        lipschitz_u,
    )?;
    let components = component_constancy(&u, &report.components, 4.0 * h);
    let comparison = scr_cr_compare(report, &u);
    Ok(LyapunovRun {
        envelope,
        pairs,
        stages,
        ut_fields,
        u,
        lipschitz_u,
        eta,
        verification,
        components,
        comparison,
        recurrence,
    })
}

/// Classification of a user-supplied function by `check-field`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldVerdict {
    /// Lyapunov and neutral everywhere: constant along orbits.
    FirstIntegral,
    Lyapunov,
    NotLyapunov,
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldCheck {
    pub lipschitz: f64,
    pub eta: f64,
    /// `max f(q) − f(p) − K·L̂_T(p, q)` over all finite graph costs, `K = lipschitz`.
    pub dominated_excess: f64,
    pub dominated: bool,
    pub lyapunov: bool,
    pub first_integral: bool,
    pub verdict: FieldVerdict,
    pub verification: VerificationReport,
}

pub struct FieldCheckRun {
    pub recurrence: RecurrenceRun,
    pub field: ScalarField,
    pub check: FieldCheck,
}

/// Dominance and Lyapunov verdicts for a tabulated function on the run's grid.
pub fn check_field(config: &RunConfig, values: Vec<f64>) -> Result<FieldCheckRun> {
    let prepared = prepare(config)?;
    if values.len() != prepared.grid.len() {
        return Err(Error::Input(format!(
            "field has {} values, the grid has {} samples",
            values.len(),
            prepared.grid.len()
        )));
    }
    let field = ScalarField::user(values)?;
    let c = &prepared.config;
    let mut times = prepared.recurrence_times()?;
    times.extend_from_slice(&c.probe_times);
    times.extend_from_slice(&c.verify_times);
    times.push(c.margin_time);
    let table = flow_image_table(&prepared.map, &prepared.grid, &merge_times(times))?;
    let recurrence = recurrence_on_table(prepared, table)?;
    let grid = &recurrence.prepared.grid;
    let c = &recurrence.prepared.config;
    let h = grid.mesh();

    let pairs = lipschitz_pairs(grid, c.lipschitz_pairs, c.seed);
    let lipschitz = check_lipschitz(&field, grid, &pairs);
    let eta = c.eta.unwrap_or(h * (1.0 + lipschitz));
    let verification = verify_lyapunov(
        &field,
        grid,
        &recurrence.table,
        &c.verify_times,
        &c.probe_times,
        c.margin_time,
        &recurrence.report.scr,
        eta,
        lipschitz,
    )?;
    let all: Vec<usize> = (0..grid.len()).collect();
    let mut dominated_excess = f64::NEG_INFINITY;
    for g in &recurrence.graphs {
        for chunk in all.chunks(256) {
            let tables = sources_cost_tables(g, chunk, None);
            dominated_excess = dominated_excess.max(check_dominated(&field, &tables, lipschitz));
        }
    }
    let lyapunov = verification.violation <= eta;
    let first_integral = lyapunov && verification.neutral_count == grid.len();
    let verdict = if first_integral {
        FieldVerdict::FirstIntegral
    } else if lyapunov {
        FieldVerdict::Lyapunov
    } else {
        FieldVerdict::NotLyapunov
    };
    let check = FieldCheck {
        lipschitz,
        eta,
        dominated_excess,
        dominated: dominated_excess <= eta,
        lyapunov,
        first_integral,
        verdict,
        verification,
    };
    Ok(FieldCheckRun { recurrence, field, check })
}
