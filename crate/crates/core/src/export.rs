//! Output files: CSV tables, JSON summaries and SVG heatmaps.
//!
//! Column orders are fixed and listed in `FORMATS.md`. Floats are written in
//! Rust's shortest round-trip form, so identical runs give identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::chaincost::RecurrenceReport;
use crate::error::{Error, Result};
use crate::lyapunov::ScalarField;
use crate::pipeline::{FieldCheckRun, LyapunovRun, RecurrenceRun};
use crate::space::SampleGrid;

fn coord_headers(grid: &SampleGrid) -> Vec<String> {
    ["x", "y"][..grid.space().dim()].iter().map(|s| s.to_string()).collect()
}

fn coords(grid: &SampleGrid, p: usize) -> Vec<String> {
    grid.point(p).coords().iter().map(|c| c.to_string()).collect()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// `index, x[, y], r_<T>…, a_<T>…, scr, cr, component`.
pub fn write_recurrence_csv<W: Write>(out: W, grid: &SampleGrid, report: &RecurrenceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(coord_headers(grid));
    header.extend(report.t_values.iter().map(|t| format!("r_{t}")));
    header.extend(report.t_values.iter().map(|t| format!("a_{t}")));
    header.extend(["scr", "cr", "component"].map(String::from));
    w.write_record(&header)?;
    for p in 0..grid.len() {
        let mut row = vec![p.to_string()];
        row.extend(coords(grid, p));
        row.extend(report.recurrence.iter().map(|r| r[p].to_string()));
        row.extend(report.a_t.iter().map(|a| flag(a[p]).to_string()));
        row.push(flag(report.scr[p]).into());
        row.push(flag(report.cr[p]).into());
        row.push(report.components[p].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `index, x[, y], value`.
pub fn write_field_csv<W: Write>(out: W, grid: &SampleGrid, field: &ScalarField) -> Result<()> {
    if field.len() != grid.len() {
        return Err(Error::Input("field and grid sizes differ".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(coord_headers(grid));
    header.push("value".into());
    w.write_record(&header)?;
    for (p, v) in field.values.iter().enumerate() {
        let mut row = vec![p.to_string()];
        row.extend(coords(grid, p));
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read the `value` column of a field CSV. Rows are taken in sample order;
/// an `index` column, when present, must count up from 0.
pub fn read_field_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let value = col("value").ok_or_else(|| Error::Input("field CSV needs a `value` column".into()))?;
    let index = col("index");
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if let Some(i) = index {
            let got: usize = rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("row {row}: bad index `{}`", &rec[i])))?;
            if got != row {
                return Err(Error::Input(format!("row {row}: index {got} out of order")));
            }
        }
        let v: f64 = rec[value]
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("row {row}: bad value `{}`", &rec[value])))?;
        values.push(v);
    }
    Ok(values)
}

const PALETTE: [(f64, [f64; 3]); 5] = [
    (0.0, [33.0, 102.0, 172.0]),
    (0.25, [103.0, 169.0, 207.0]),
    (0.5, [247.0, 247.0, 247.0]),
    (0.75, [239.0, 138.0, 98.0]),
    (1.0, [178.0, 24.0, 43.0]),
];

/// Fixed blue-white-red ramp on `[0, 1]`.
pub fn palette(x: f64) -> String {
    let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { 1.0 };
    let k = PALETTE.iter().position(|(s, _)| *s >= x).unwrap_or(4).max(1);
    let (s0, c0) = PALETTE[k - 1];
    let (s1, c1) = PALETTE[k];
    let a = (x - s0) / (s1 - s0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + a * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of per-sample values. 2-D grids draw one cell per sample with `y`
/// upward; 1-D grids draw a horizontal strip. The legend shows the value range.
pub fn heatmap_svg(grid: &SampleGrid, values: &[f64], title: &str) -> String {
    let res = grid.resolution();
    let (nx, ny) = if res.len() == 2 { (res[0], res[1]) } else { (res[0], 1) };
    let cell = (512 / nx.max(ny)).max(2);
    let (width, height) = (nx * cell, if ny == 1 { 48 } else { ny * cell });
    let cell_h = if ny == 1 { height } else { cell };
    let finite = values.iter().filter(|v| v.is_finite());
    let lo = finite.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (lo_txt, hi_txt) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let legend_y = height + 16;
    let total_h = legend_y + 40;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{total_h}\" viewBox=\"0 0 {} {total_h}\" shape-rendering=\"crispEdges\">\n",
        width + 20,
        width + 20
    ));
    s.push_str(&format!("<title>{}</title>\n<g transform=\"translate(10,0)\">\n", escape(title)));
    for p in 0..grid.len() {
        let m = grid.multi_index(p);
        let (i, j) = (m[0], if ny == 1 { 0 } else { m[1] });
        let x = i * cell;
        let y = if ny == 1 { 0 } else { (ny - 1 - j) * cell };
        let v = values[p];
        let fill = if v.is_finite() { palette((v - lo) / span) } else { "#000000".into() };
        s.push_str(&format!("<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell_h}\" fill=\"{fill}\"/>\n"));
    }
    s.push_str("<defs><linearGradient id=\"ramp\">");
    for (stop, _) in PALETTE {
        s.push_str(&format!("<stop offset=\"{stop}\" stop-color=\"{}\"/>", palette(stop)));
    }
    s.push_str("</linearGradient></defs>\n");
    let bar_w = width.min(256);
    s.push_str(&format!("<rect x=\"0\" y=\"{legend_y}\" width=\"{bar_w}\" height=\"10\" fill=\"url(#ramp)\"/>\n"));
    let ty = legend_y + 24;
    s.push_str(&format!(
        "<text x=\"0\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{lo_txt:.4e}</text>\n\
         <text x=\"{bar_w}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{hi_txt:.4e}</text>\n"
    ));
    s.push_str("</g>\n</svg>\n");
    s
}

fn bitmap_values(b: &[bool]) -> Vec<f64> {
    b.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn to_json<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn recurrence_slacks(run: &RecurrenceRun) -> Value {
    let h = run.prepared.mesh();
    let c = &run.prepared.config;
    json!({
        "mesh": h,
        "snapping_per_step": 2.0 * h,
        "epsilon": run.report.epsilon,
        "epsilon_cr": c.kappa_cr * h,
        "epsilon_component": run.report.epsilon_component,
        "edge_budget": run.report.budget,
        "monotonicity_slack": 2.0 * h,
    })
}

/// Summary written to `recurrence.json`.
pub fn recurrence_json(run: &RecurrenceRun) -> Result<Value> {
    let r = &run.report;
    Ok(json!({
        "config": to_json(&run.prepared.config)?,
        "samples": run.prepared.grid.len(),
        "t_values": r.t_values,
        "a_t_sizes": r.a_t.iter().map(|a| a.iter().filter(|&&b| b).count()).collect::<Vec<_>>(),
        "scr_size": r.scr_count(),
        "cr_size": r.cr_count(),
        "cr_t": r.cr_t,
        "component_count": r.component_count(),
        "slacks": recurrence_slacks(run),
        "graphs": to_json(&r.graph_stats)?,
        "ground_truth": to_json(&run.ground_truth)?,
        "warnings": r.warnings,
    }))
}

/// Summary written to `verify.json` by `lyap`.
pub fn verify_json(run: &LyapunovRun) -> Result<Value> {
    let rec = &run.recurrence;
    Ok(json!({
        "config": to_json(&rec.prepared.config)?,
        "samples": rec.prepared.grid.len(),
        "eta": run.eta,
        "lipschitz_u": run.lipschitz_u,
        "verification": to_json(&run.verification)?,
        "slacks": {
            "recurrence": recurrence_slacks(rec),
            "u_interpolation": run.u.provenance.interpolation_slack,
            "u_tail": run.u.provenance.tail_bound,
        },
        "u_provenance": to_json(&run.u.provenance)?,
        "stages": to_json(&run.stages)?,
        "lipschitz_envelope": to_json(&run.envelope)?,
        "components": to_json(&run.components)?,
        "scr_cr": to_json(&run.comparison)?,
        "scr_size": rec.report.scr_count(),
        "cr_size": rec.report.cr_count(),
        "component_count": rec.report.component_count(),
        "ground_truth": to_json(&rec.ground_truth)?,
        "warnings": rec.report.warnings,
    }))
}

/// Summary written to `check.json` by `check-field`.
pub fn check_json(run: &FieldCheckRun) -> Result<Value> {
    let rec = &run.recurrence;
    Ok(json!({
        "config": to_json(&rec.prepared.config)?,
        "samples": rec.prepared.grid.len(),
        "check": to_json(&run.check)?,
        "slacks": recurrence_slacks(rec),
        "scr_size": rec.report.scr_count(),
        "warnings": rec.report.warnings,
    }))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// `recurrence.csv`, `recurrence.json`, `scr.svg`, `cr.svg` (SVGs for 2-D grids only).
pub fn write_recurrence(run: &RecurrenceRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let grid = &run.prepared.grid;
    let mut written = Vec::new();
    let csv_path = dir.join("recurrence.csv");
    write_recurrence_csv(create(&csv_path)?, grid, &run.report)?;
    written.push(csv_path);
    let json_path = dir.join("recurrence.json");
    write_json(&json_path, &recurrence_json(run)?)?;
    written.push(json_path);
    if grid.space().dim() == 2 {
        for (name, set) in [("scr", &run.report.scr), ("cr", &run.report.cr)] {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, heatmap_svg(grid, &bitmap_values(set), &name.to_uppercase()))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `u.csv`, `u.svg`, `verify.json`.
pub fn write_lyapunov(run: &LyapunovRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let grid = &run.recurrence.prepared.grid;
    let csv_path = dir.join("u.csv");
    write_field_csv(create(&csv_path)?, grid, &run.u)?;
    let svg_path = dir.join("u.svg");
    fs::write(&svg_path, heatmap_svg(grid, &run.u.values, "u"))?;
    let json_path = dir.join("verify.json");
    write_json(&json_path, &verify_json(run)?)?;
    Ok(vec![csv_path, svg_path, json_path])
}

/// `check.json`.
pub fn write_check(run: &FieldCheckRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = dir.join("check.json");
    write_json(&path, &check_json(run)?)?;
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_grid, SpaceDescriptor};

    #[test]
    fn field_csv_roundtrip() {
        let grid = build_grid(&SpaceDescriptor::torus2(1.0, 1.0).unwrap(), &[4, 4]).unwrap();
        let values: Vec<f64> = (0..16).map(|i| i as f64 / 7.0).collect();
        let field = ScalarField::user(values.clone()).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &grid, &field).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,x,y,value\n"));
        assert_eq!(read_field_csv(&buf[..]).unwrap(), values);
    }

    #[test]
    fn field_csv_rejects() {
        assert!(read_field_csv(&b"index,v\n0,1\n"[..]).is_err());
        assert!(read_field_csv(&b"index,value\n1,1\n"[..]).is_err());
        assert!(read_field_csv(&b"value\nabc\n"[..]).is_err());
        assert_eq!(read_field_csv(&b"value\n1\n2.5\n"[..]).unwrap(), vec![1.0, 2.5]);
    }

    #[test]
    fn palette_endpoints() {
        assert_eq!(palette(0.0), "#2166ac");
        assert_eq!(palette(0.5), "#f7f7f7");
        assert_eq!(palette(1.0), "#b2182b");
        assert_eq!(palette(f64::NAN), "#b2182b");
    }

    #[test]
    fn svg_has_one_cell_per_sample() {
        let grid = build_grid(&SpaceDescriptor::circle(1.0).unwrap(), &[8]).unwrap();
        let s = heatmap_svg(&grid, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, f64::INFINITY], "t<1>");
        assert_eq!(s.matches("<rect").count(), 8 + 1);
        assert!(s.contains("t&lt;1&gt;"));
        assert!(s.contains("6.0000e0"));
    }
}
