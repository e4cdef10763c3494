//! Reporting over a search archive: Pareto front tables, per-generation
//! history, hypervolume series, and small self-contained SVG renderings.

use crate::error::Result;
use crate::pipeline::{pareto_front, ArchiveEntry, FrontRow, GenStats};

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("csv flush to memory");
    String::from_utf8(bytes).expect("csv output is utf8")
}

pub fn front_csv(archive: &[ArchiveEntry]) -> Result<String> {
    let rows = pareto_front(archive)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "genome",
        "arch",
        "psnr",
        "mse",
        "params",
        "multi_adds",
        "violation",
        "generation",
        "feasible",
    ])
    .expect("csv write to memory");
    for row in &rows {
        let e = &row.entry;
        w.write_record(&[
            e.genome.to_string(),
            e.genome.arch_string(),
            format!("{}", e.psnr),
            format!("{}", e.mse),
            e.params.to_string(),
            e.multi_adds.to_string(),
            format!("{}", e.violation),
            e.generation.to_string(),
            row.feasible.to_string(),
        ])
        .expect("csv write to memory");
    }
    Ok(finish_csv(w))
}

pub fn front_json(archive: &[ArchiveEntry]) -> Result<String> {
    let rows = pareto_front(archive)?;
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let e = &row.entry;
            serde_json::json!({
                "genome": e.genome.cells(),
                "arch": e.genome.arch_string(),
                "psnr": e.psnr,
                "mse": e.mse,
                "params": e.params,
                "multi_adds": e.multi_adds,
                "violation": e.violation,
                "generation": e.generation,
                "feasible": row.feasible,
            })
        })
        .collect();
    Ok(serde_json::to_string_pretty(&items)?)
}

pub fn history_csv(history: &[GenStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "generation",
        "evaluated",
        "cache_hits",
        "timeouts",
        "precheck_skips",
        "feasible",
        "best_psnr",
    ])
    .expect("csv write to memory");
    for s in history {
        w.write_record(&[
            s.generation.to_string(),
            s.evaluated.to_string(),
            s.cache_hits.to_string(),
            s.timeouts.to_string(),
            s.precheck_skips.to_string(),
            s.feasible.to_string(),
            format!("{}", s.best_psnr),
        ])
        .expect("csv write to memory");
    }
    finish_csv(w)
}

pub fn hv_csv(series: &[(usize, f64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["generation", "hypervolume"]).expect("csv write to memory");
    for (g, hv) in series {
        w.write_record(&[g.to_string(), format!("{hv}")]).expect("csv write to memory");
    }
    finish_csv(w)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn map(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi <= lo {
        return (out_lo + out_hi) / 2.0;
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

fn svg_frame(title: &str, x_label: &str, y_label: &str, body: &str) -> String {
    let x0 = MARGIN;
    let x1 = SVG_W - MARGIN;
    let y0 = SVG_H - MARGIN;
    let y1 = MARGIN;
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
            "<text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333333\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#333333\"/>\n",
            "<text x=\"{tx}\" y=\"{lx}\" text-anchor=\"middle\">{x_label}</text>\n",
            "<text x=\"16\" y=\"{ty}\" text-anchor=\"middle\" ",
            "transform=\"rotate(-90 16 {ty})\">{y_label}</text>\n",
            "{body}</svg>\n"
        ),
        w = SVG_W,
        h = SVG_H,
        tx = SVG_W / 2.0,
        ty = SVG_H / 2.0,
        lx = SVG_H - 14.0,
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1,
        title = title,
        x_label = x_label,
        y_label = y_label,
        body = body,
    )
}

fn axis_ticks(lo: f64, hi: f64, horizontal: bool) -> String {
    let mut out = String::new();
    for (v, frac) in [(lo, 0.0), ((lo + hi) / 2.0, 0.5), (hi, 1.0)] {
        if horizontal {
            let x = map(frac, 0.0, 1.0, MARGIN, SVG_W - MARGIN);
            out.push_str(&format!(
                "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">{v:.4}</text>\n",
                y = SVG_H - MARGIN + 18.0
            ));
        } else {
            let y = map(frac, 0.0, 1.0, SVG_H - MARGIN, MARGIN);
            out.push_str(&format!(
                "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\">{v:.4}</text>\n",
                x = MARGIN - 6.0
            ));
        }
    }
    out
}

/// Scatter of the Pareto front: multi-adds against psnr.
pub fn front_svg(archive: &[ArchiveEntry]) -> Result<String> {
    let rows: Vec<FrontRow> = pareto_front(archive)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.entry.multi_adds as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.entry.psnr).collect();
    let (x_lo, x_hi) = bounds(&xs);
    let (y_lo, y_hi) = bounds(&ys);
    let mut body = axis_ticks(x_lo, x_hi, true);
    body.push_str(&axis_ticks(y_lo, y_hi, false));
    for row in &rows {
        let x = map(row.entry.multi_adds as f64, x_lo, x_hi, MARGIN, SVG_W - MARGIN);
        let y = map(row.entry.psnr, y_lo, y_hi, SVG_H - MARGIN, MARGIN);
        let fill = if row.feasible { "#2b6cb0" } else { "#c53030" };
        body.push_str(&format!("<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{fill}\"/>\n"));
    }
    Ok(svg_frame("pareto front", "multi-adds", "psnr (dB)", &body))
}

/// Hypervolume over generations as a polyline.
pub fn hv_svg(series: &[(usize, f64)]) -> String {
    let xs: Vec<f64> = series.iter().map(|(g, _)| *g as f64).collect();
    let ys: Vec<f64> = series.iter().map(|(_, hv)| *hv).collect();
    let (x_lo, x_hi) = bounds(&xs);
    let (y_lo, y_hi) = bounds(&ys);
    let mut body = axis_ticks(x_lo, x_hi, true);
    body.push_str(&axis_ticks(y_lo, y_hi, false));
    let points: Vec<String> = series
        .iter()
        .map(|(g, hv)| {
            let x = map(*g as f64, x_lo, x_hi, MARGIN, SVG_W - MARGIN);
            let y = map(*hv, y_lo, y_hi, SVG_H - MARGIN, MARGIN);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    if !points.is_empty() {
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
    }
    svg_frame("hypervolume", "generation", "hypervolume", &body)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
