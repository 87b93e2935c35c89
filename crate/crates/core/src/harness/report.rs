use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Condition, ExperimentReport};
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

/// One row per generation, in report order.
pub fn scores_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record([
        "prompt_index",
        "condition",
        "seed",
        "score",
        "similarity_to_e",
        "drift_cosine",
    ])
    .map_err(map)?;
    for g in &report.generations {
        w.write_record([
            g.prompt_index.to_string(),
            g.condition.to_string(),
            g.seed.to_string(),
            g.score.to_string(),
            g.similarity_to_e.to_string(),
            g.drift_cosine.to_string(),
        ])
        .map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn summary_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn colour(c: Condition) -> &'static str {
    match c {
        Condition::Original => "#4c72b0",
        Condition::Personalized => "#dd8452",
        Condition::Keyword => "#55a868",
    }
}

/// Overlaid per-condition histograms over a shared
/// [`HISTOGRAM_BINS`]-bin axis spanning the observed score range.
pub fn render_histogram(report: &ExperimentReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let all: Vec<f64> = report.generations.iter().map(|g| g.score).collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let bin = |x: f64| (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);

    let counts: Vec<(Condition, Vec<usize>)> = report
        .conditions
        .iter()
        .map(|s| {
            let mut c = vec![0usize; HISTOGRAM_BINS];
            for x in report.scores(s.condition) {
                c[bin(x)] += 1;
            }
            (s.condition, c)
        })
        .collect();
    let peak = counts
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">Score distribution</text>"#,
        W / 2.0
    );
    let bar_w = plot_w / HISTOGRAM_BINS as f64;
    for (condition, c) in &counts {
        let _ = writeln!(
            svg,
            r#"<g class="{condition}" fill="{}" fill-opacity="0.45" stroke="{}">"#,
            colour(*condition),
            colour(*condition)
        );
        for (i, &n) in c.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let h = plot_h * n as f64 / peak;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"><title>{condition}: {n}</title></rect>"#,
                LEFT + i as f64 * bar_w,
                TOP + plot_h - h,
                bar_w,
                h
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let axis_y = TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{axis_y}" stroke="black"/>"#
    );
    for i in (0..=HISTOGRAM_BINS).step_by(5) {
        let x = LEFT + i as f64 * bar_w;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#,
            axis_y + 16.0,
            lo + i as f64 * width
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">aesthetic score</text>"#,
        LEFT + plot_w / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{}" text-anchor="end">{}</text>"#,
        TOP + 4.0,
        peak as usize
    );
    for (i, (condition, _)) in counts.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * i as f64;
        let x = LEFT + plot_w - 120.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}" fill-opacity="0.6"/><text x="{}" y="{}">{condition}</text>"#,
            y - 10.0,
            colour(*condition),
            x + 18.0,
            y
        );
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Writes `scores.csv`, `summary.json` and `histogram.svg` into `out_dir`,
/// creating it if needed.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let files = [
        ("scores.csv", scores_csv(report)?),
        ("summary.json", summary_json(report)),
        ("histogram.svg", render_histogram(report)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
