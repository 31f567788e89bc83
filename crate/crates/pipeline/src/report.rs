//! Plain SVG charts and the `report` stage.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde_json::json;

use crate::cache::{digest_bytes, KeyBuilder};
use crate::stages::{copy_if_changed, Context, EvalSummary};

pub const REPORT_DIR: &str = "report";
pub const AP_TABLE: &str = "ap_table.tsv";
pub const AP_CHART: &str = "ap_per_class.svg";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 96.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn frame(title: &str, x_label: &str, y_label: &str, ticks: &[String], x_at: impl Fn(usize) -> f64) -> String {
    let plot_h = HEIGHT - TOP - BOTTOM;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = TOP + plot_h * (1.0 - v);
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>\n<line x1=\"{LEFT}\" y1=\"{0:.1}\" x2=\"{:.1}\" y2=\"{0:.1}\" stroke=\"black\"/>",
        TOP + plot_h,
        WIDTH - RIGHT
    );
    for (i, t) in ticks.iter().enumerate() {
        let x = x_at(i);
        let y = TOP + plot_h + 14.0;
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"end\" transform=\"rotate(-35 {x:.1} {y:.1})\">{}</text>",
            escape(t)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{0:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1})\">{1}</text>",
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    s
}

fn y_of(v: f64) -> f64 {
    TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - v.clamp(0.0, 1.0))
}

/// Bar chart of values in [0, 1].
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let slot = (WIDTH - LEFT - RIGHT) / bars.len().max(1) as f64;
    let x_at = |i: usize| LEFT + slot * (i as f64 + 0.5);
    let ticks: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    let mut s = frame(title, x_label, y_label, &ticks, x_at);
    for (i, (_, v)) in bars.iter().enumerate() {
        let y = y_of(*v);
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#4a78b5\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{v:.3}</text>",
            x_at(i) - slot * 0.35,
            slot * 0.7,
            y_of(0.0) - y,
            x_at(i),
            y - 3.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart with one marker per point, values in [0, 1].
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(String, f64)]) -> String {
    let n = points.len().max(1);
    let span = WIDTH - LEFT - RIGHT;
    let x_at = move |i: usize| {
        if n == 1 {
            LEFT + span / 2.0
        } else {
            LEFT + 24.0 + (span - 48.0) * i as f64 / (n - 1) as f64
        }
    };
    let ticks: Vec<String> = points.iter().map(|p| p.0.clone()).collect();
    let mut s = frame(title, x_label, y_label, &ticks, x_at);
    let path: Vec<String> = points
        .iter()
        .enumerate()
        .map(|(i, (_, v))| format!("{:.1},{:.1}", x_at(i), y_of(*v)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>",
        path.join(" ")
    );
    for (i, (_, v)) in points.iter().enumerate() {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#c0392b\"/>\n<text x=\"{0:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{v:.3}</text>",
            x_at(i),
            y_of(*v),
            y_of(*v) - 8.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn ap_bars(summary: &EvalSummary) -> Vec<(String, f64)> {
    let mut bars: Vec<(String, f64)> = summary
        .classes
        .iter()
        .filter_map(|c| c.ap.map(|ap| (c.name.clone(), ap)))
        .collect();
    bars.push(("mAP".into(), summary.map));
    bars
}

/// Parses a sweep table written by [`crate::sweep`] into (value, mAP) pairs.
pub fn read_sweep_table(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let mut cols = line.split('\t');
            let value = cols.next()?.to_string();
            let map = cols.next()?.parse().ok()?;
            Some((value, map))
        })
        .collect()
}

pub fn sweep_chart(axis: &str, rows: &[(String, f64)]) -> String {
    let x_label = match axis {
        "codebook_size" => "codebook size",
        "layer_subset" => "layer subset",
        other => other,
    };
    line_chart(&format!("mAP vs {x_label}"), x_label, "mAP", rows)
}

/// Writes the AP table and chart for the evaluated run, and redraws a chart
/// for every sweep table under `<out>/sweeps`.
pub fn run_report(ctx: &Context) -> Result<()> {
    let start = Instant::now();
    let summary = ctx.load_summary()?;
    let sweeps_dir = ctx.cfg.out_dir.join(crate::sweep::SWEEP_DIR);
    let mut sweeps = Vec::new();
    if sweeps_dir.is_dir() {
        for entry in fs::read_dir(&sweeps_dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "tsv") {
                let text = fs::read_to_string(&path)?;
                let axis = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                sweeps.push((axis, text));
            }
        }
    }
    sweeps.sort();
    let sweep_digests: Vec<(&str, String)> = sweeps
        .iter()
        .map(|(a, t)| (a.as_str(), digest_bytes(t.as_bytes())))
        .collect();
    let key = KeyBuilder::new("report")
        .field("evaluate", &ctx.eval_key())
        .field("sweeps", &sweep_digests)
        .finish();
    let hit = ctx.cache.is_complete("report", &key);
    if !hit {
        ctx.cache
            .store("report", &key, json!({ "sweeps": sweeps.len() }), |d| {
                fs::write(d.join(AP_TABLE), summary.to_tsv())?;
                let title = format!(
                    "AP per class ({}, size {}, {})",
                    serde_json::to_value(summary.encoder)?.as_str().unwrap_or("?"),
                    summary.size,
                    summary.layers
                );
                fs::write(d.join(AP_CHART), bar_chart(&title, "class", "AP", &ap_bars(&summary)))?;
                for (axis, text) in &sweeps {
                    fs::write(
                        d.join(format!("sweep_{axis}.svg")),
                        sweep_chart(axis, &read_sweep_table(text)),
                    )?;
                }
                Ok(())
            })?;
    }
    let dir = ctx.cache.require("report", &key)?;
    let out = ctx.cfg.out_dir.join(REPORT_DIR);
    fs::create_dir_all(&out)?;
    for entry in fs::read_dir(&dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap_or_default();
        if name != crate::cache::META_FILE {
            copy_if_changed(&path, &out.join(name))?;
        }
    }
    ctx.cache
        .log_stage("report", &key, hit, start.elapsed().as_millis(), "");
    Ok(())
}

pub fn write_if_changed(path: &Path, contents: &str) -> Result<()> {
    if fs::read_to_string(path).ok().as_deref() != Some(contents) {
        fs::write(path, contents)?;
    }
    Ok(())
}
