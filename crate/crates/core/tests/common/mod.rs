//! Invariant suite shared by the integration and acceptance tests.

#![allow(dead_code)]

use strongchain_core::chaincost::{cr_estimate, full_cost_matrix, ChainCostTable, TransitionGraph};
use strongchain_core::config::RunConfig;
use strongchain_core::flow::FlowImageTable;
use strongchain_core::lyapunov::{
    build_ut_bar, build_ut_tilde, check_dominated, duality_check, ut_bar_bounds, verify_lyapunov,
    ScalarField,
};
use strongchain_core::pipeline::{run_lyapunov, LyapunovRun};
use strongchain_core::space::SampleGrid;
use strongchain_core::systems::SystemId;

/// Absolute tolerance for relations that hold exactly in exact arithmetic.
pub const EXACT: f64 = 1e-9;

#[derive(Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Resolution used for the invariant suite: 32 on the circle, 16 per axis in 2-D.
pub fn suite_resolution(id: SystemId) -> usize {
    if id.space().dim() == 1 {
        32
    } else {
        16
    }
}

pub fn config(id: SystemId, res: usize) -> RunConfig {
    RunConfig { resolution: vec![res], ..RunConfig::for_system(id) }
}

/// `max (|f(p) − f(q)| − K·d(p, q))` over the pairs.
pub fn lipschitz_excess(f: &ScalarField, grid: &SampleGrid, pairs: &[(usize, usize)], k: f64) -> f64 {
    pairs
        .iter()
        .map(|&(p, q)| (f.values[p] - f.values[q]).abs() - k * grid.space().dist(grid.point(p), grid.point(q)))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn triangle_excess(full: &[ChainCostTable]) -> f64 {
    let n = full.len();
    let mut worst = f64::NEG_INFINITY;
    for x in 0..n {
        let lx = &full[x].values;
        for y in 0..n {
            let lxy = lx[y];
            if !lxy.is_finite() {
                continue;
            }
            let ly = &full[y].values;
            for z in 0..n {
                if lx[z].is_finite() && ly[z].is_finite() {
                    worst = worst.max(lx[z] - lxy - ly[z]);
                }
            }
        }
    }
    worst
}

pub fn endpoint_excess(full: &[ChainCostTable], grid: &SampleGrid) -> f64 {
    let pairs = grid.neighbor_pairs();
    let mut worst = f64::NEG_INFINITY;
    for t in full {
        for &(q, r) in &pairs {
            if t.values[q].is_finite() && t.values[r].is_finite() {
                let d = grid.space().dist(grid.point(q), grid.point(r));
                worst = worst.max((t.values[q] - t.values[r]).abs() - d);
            }
        }
    }
    worst
}

fn fmt(x: f64) -> String {
    format!("{x:.3e}")
}

/// Dense `T = 1` graph of the Lyapunov stage and its full cost matrix.
pub fn dense_unit_graph(run: &LyapunovRun) -> (TransitionGraph, Vec<ChainCostTable>, Vec<f64>) {
    let prepared = &run.recurrence.prepared;
    let grid = &prepared.grid;
    let tg = prepared.lyapunov_time_grid(1).unwrap();
    let graph = TransitionGraph::build(grid, &run.recurrence.table, &tg, 2.0 * grid.space().diameter()).unwrap();
    let full = full_cost_matrix(&graph).unwrap();
    (graph, full, tg.steps().to_vec())
}

fn max_flow_increase(f: &ScalarField, table: &FlowImageTable, times: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &t in times {
        let k = table.require_time(t).unwrap();
        for p in 0..f.len() {
            worst = worst.max(f.values[table.nearest(p, k)] - f.values[p]);
        }
    }
    worst
}

/// Every quantified chaincost and lyapunov invariant on one builtin system.
pub fn invariant_suite(id: SystemId, res: usize) -> Vec<Check> {
    let run = run_lyapunov(&config(id, res)).unwrap();
    let rec = &run.recurrence;
    let prepared = &rec.prepared;
    let c = &prepared.config;
    let grid = &prepared.grid;
    let table = &rec.table;
    let h = grid.mesh();
    let report = &rec.report;
    let mut out = Vec::new();
    let tag = |s: &str| format!("{id} res {res}: {s}");

    let (graph, full, steps) = dense_unit_graph(&run);

    let tri = triangle_excess(&full);
    out.push(Check::new(tag("triangle inequality"), tri <= EXACT, format!("max excess {}", fmt(tri))));
    let ep = endpoint_excess(&full, grid);
    out.push(Check::new(tag("endpoint 1-Lipschitz"), ep <= EXACT, format!("max excess {}", fmt(ep))));

    // L(p, nearest(φ_t p)) ≤ h for every step t of the grid.
    let mut one_step = f64::NEG_INFINITY;
    for &t in &steps {
        let k = table.require_time(t).unwrap();
        for p in 0..grid.len() {
            one_step = one_step.max(full[p].get(table.nearest(p, k)));
        }
    }
    out.push(Check::new(tag("one-step bound ≤ h"), one_step <= h + EXACT, format!("max {} vs h {}", fmt(one_step), fmt(h))));

    // r_{2T} ≥ r_T − 2h, and A_{2T} ⊆ {r_T ≤ κh + 2h}.
    let mut mono = true;
    let mut nest = true;
    for k in 0..report.t_values.len() {
        for k2 in 0..report.t_values.len() {
            if (report.t_values[k2] - 2.0 * report.t_values[k]).abs() > 1e-12 {
                continue;
            }
            for p in 0..grid.len() {
                let (r1, r2) = (report.recurrence[k][p], report.recurrence[k2][p]);
                mono &= r2 >= r1 - 2.0 * h;
                nest &= !report.a_t[k2][p] || r1 <= report.epsilon + 2.0 * h;
            }
        }
    }
    out.push(Check::new(tag("monotone in T (2h slack)"), mono, ""));
    out.push(Check::new(tag("A_T nesting (2h slack)"), nest, ""));

    // A_T ⊆ CR estimate of the same graph at the same ε.
    let mut incl = true;
    for (g, a) in rec.graphs.iter().zip(&report.a_t) {
        let cr = cr_estimate(g, report.epsilon);
        incl &= a.iter().zip(&cr).all(|(a, c)| !a || *c);
    }
    out.push(Check::new(tag("A_T ⊆ CR at matched ε"), incl, ""));

    // Pipeline at T = 1.
    let ut = &run.ut_fields[0];
    let m1 = run.envelope.at(1.0).unwrap();
    let tilde = build_ut_tilde(ut, grid, table, 1.0, c.s_count, m1).unwrap();
    let bar = build_ut_bar(&tilde, grid, table, &run.envelope, 1.0, c.s_max, c.ds).unwrap();
    let dominates = tilde.values.iter().zip(&ut.values).all(|(a, b)| a >= b);
    out.push(Check::new(tag("ũ_T ≥ u_T pointwise"), dominates, ""));
    let (lo, hi) = ut_bar_bounds(&tilde, &run.envelope, 1.0, c.s_max, c.ds).unwrap();
    // Bound and value sum the same terms in different orders.
    let round = 1e-12 * hi.abs();
    let within = bar.values.iter().all(|&v| v >= lo - round && v <= hi + round);
    out.push(Check::new(
        tag("ū_T within exact bounds"),
        within,
        format!("[{}, {}] vs range [{}, {}]", fmt(lo), fmt(hi), fmt(bar.min()), fmt(bar.max())),
    ));
    if run.envelope.m_values.iter().all(|&m| m == 1.0) {
        let lo2 = tilde.min() * (1.0 - (-c.s_max).exp()) / m1;
        let ok = bar.values.iter().all(|&v| v >= lo2 - EXACT && v <= tilde.max() + EXACT);
        out.push(Check::new(tag("ū_T within [min ũ(1−e^{−s_max})/M_T, max ũ] (M ≡ 1)"), ok, ""));
    }

    // Lipschitz stage bounds with their snapping slacks: u_T is built from
    // 1-Lipschitz endpoint costs (exact); ũ_T compares images snapped at ≤ h
    // each (+4h); ū_T and u average ũ at unit total weight (+8h).
    let pairs = &run.pairs;
    let e_ut = lipschitz_excess(ut, grid, pairs, 2.0);
    let e_tilde = lipschitz_excess(&tilde, grid, pairs, 2.0 * m1);
    let e_bar = lipschitz_excess(&bar, grid, pairs, 2.0);
    let e_u = lipschitz_excess(&run.u, grid, pairs, 4.0);
    out.push(Check::new(tag("u_T 2-Lipschitz"), e_ut <= EXACT, format!("excess {}", fmt(e_ut))));
    out.push(Check::new(tag("ũ_T 2M_T-Lipschitz (+4h)"), e_tilde <= 4.0 * h, format!("excess {}", fmt(e_tilde))));
    out.push(Check::new(tag("ū_T 2-Lipschitz (+8h)"), e_bar <= 8.0 * h, format!("excess {}", fmt(e_bar))));
    out.push(Check::new(tag("u 4-Lipschitz (+8h)"), e_u <= 8.0 * h, format!("excess {}", fmt(e_u))));

    // u_T(nearest(φ_t p)) ≤ u_T(p) + h for t ≥ T: one edge of weight ≤ h.
    let inc = max_flow_increase(ut, table, &steps);
    out.push(Check::new(tag("u_T Lyapunov for t ≥ T (slack h)"), inc <= h + EXACT, format!("max increase {}", fmt(inc))));

    let v = &run.verification;
    out.push(Check::new(
        tag("u Lyapunov (violation ≤ η)"),
        v.violation <= run.eta,
        format!("violation {} η {}", fmt(v.violation), fmt(run.eta)),
    ));
    out.push(Check::new(tag("N(u) ⊇ SCR (one-cell band)"), v.scr_not_neutral == 0, format!("{} SCR samples not neutral", v.scr_not_neutral)));

    // Five more Lyapunov functions: u_T for T = 1..5. SCR admits samples
    // whose discrete cycles cost up to ε, and u_T may drop by that much
    // along such a sample's orbit, so the neutrality slack is ε + h.
    let mut missing = Vec::new();
    for (k, f) in run.ut_fields.iter().take(5).enumerate() {
        let lip = strongchain_core::lyapunov::check_lipschitz(f, grid, pairs);
        let eta = report.epsilon + h;
        let t = (k + 1) as f64;
        let probe = [t, 2.0 * t];
        let rep = verify_lyapunov(f, grid, table, &probe, &probe, c.margin_time, &report.scr, eta, lip).unwrap();
        missing.push(rep.scr_not_neutral);
    }
    out.push(Check::new(tag("N(u_T) ⊇ SCR for T = 1..5"), missing.iter().all(|&m| m == 0), format!("{missing:?}")));

    // f(q) − f(p) ≤ K·L(p, q): u_T with K = 2 (exact by the triangle
    // inequality), u with its measured Lipschitz constant (slack η).
    let d_ut = check_dominated(ut, &full, 2.0);
    out.push(Check::new(tag("u_T 2-dominated"), d_ut <= EXACT, format!("excess {}", fmt(d_ut))));
    let d_u = check_dominated(&run.u, &full, run.lipschitz_u);
    out.push(Check::new(tag("u Lip(u)-dominated (slack η)"), d_u <= run.eta, format!("excess {}", fmt(d_u))));

    let dual = duality_check(grid, &report.scr, &full, table, &steps, report.epsilon).unwrap();
    out.push(Check::new(
        tag("duality attained within ε"),
        dual.pass,
        format!(
            "checked {} endpoint {} flow {} self {}",
            dual.checked,
            fmt(dual.endpoint_excess),
            fmt(dual.flow_increase),
            fmt(dual.self_cost)
        ),
    ));
    drop(graph);
    out
}
