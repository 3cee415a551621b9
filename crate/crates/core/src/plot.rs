//! Minimal SVG output for per-round accuracy curves and final-accuracy bars.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{load_csv, MetricsRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const HEADS: [&str; 3] = ["SM", "UM", "EM"];
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Curve,
    Bar,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curve" => Ok(PlotKind::Curve),
            "bar" => Ok(PlotKind::Bar),
            _ => Err(Error::config(format!("unknown plot kind `{s}`, expected curve or bar"))),
        }
    }
}

/// A labeled metrics series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub records: Vec<MetricsRecord>,
}

fn heads(r: &MetricsRecord) -> [f64; 3] {
    [r.acc_sm, r.acc_um, r.acc_em]
}

/// Label for a CSV: its stem, or the enclosing directories for run
/// directories where every file is called `metrics.csv`.
pub fn series_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem != "metrics" {
        return stem;
    }
    let parts: Vec<String> = path
        .parent()
        .into_iter()
        .flat_map(|p| p.components().rev().take(2))
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.is_empty() {
        stem
    } else {
        parts.into_iter().rev().collect::<Vec<_>>().join("/")
    }
}

pub fn load_series(paths: &[impl AsRef<Path>]) -> Result<Vec<Series>> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let records = load_csv(p)?;
            if records.is_empty() {
                return Err(Error::data(format!("{} has no rows", p.display())));
            }
            Ok(Series {
                label: series_label(p),
                records,
            })
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn y_of(acc: f64) -> f64 {
    HEIGHT - MARGIN - acc.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN)
}

fn axes(out: &mut String) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for tick in 0..=4 {
        let acc = tick as f64 / 4.0;
        let y = y_of(acc);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{acc:.2}</text>"#,
            x0 - 4.0,
            y + 4.0
        );
    }
}

/// One polyline per head and series over rounds.
pub fn curve_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.records.is_empty()) {
        return Err(Error::data("curve plot needs at least one non-empty series"));
    }
    let max_round = series
        .iter()
        .flat_map(|s| s.records.iter().map(|r| r.round))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let x_of = |round: usize| MARGIN + round as f64 / max_round * (WIDTH - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, "accuracy per round");
    axes(&mut out);
    let dashes = ["", " stroke-dasharray=\"6 3\"", " stroke-dasharray=\"2 2\""];
    let mut legend_y = MARGIN;
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        for (h, head) in HEADS.iter().enumerate() {
            let points: Vec<String> = s
                .records
                .iter()
                .map(|r| format!("{:.2},{:.2}", x_of(r.round), y_of(heads(r)[h])))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}"{} points="{}"><title>{} {head}</title></polyline>"#,
                dashes[h],
                points.join(" "),
                escape(&s.label)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{legend_y:.2}" fill="{color}">{} {head}</text>"#,
                WIDTH - MARGIN + 4.0 - 120.0,
                escape(&s.label)
            );
            legend_y += 13.0;
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// One group of three bars (final SM, UM, EM) per series.
pub fn bar_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.records.is_empty()) {
        return Err(Error::data("bar plot needs at least one non-empty series"));
    }
    let mut out = String::new();
    header(&mut out, "final accuracy");
    axes(&mut out);
    let group_w = (WIDTH - 2.0 * MARGIN) / series.len() as f64;
    let bar_w = group_w * 0.8 / 3.0;
    for (gi, s) in series.iter().enumerate() {
        let last = s.records.last().expect("checked non-empty");
        let gx = MARGIN + gi as f64 * group_w + group_w * 0.1;
        let _ = writeln!(out, r#"<g class="group"><title>{}</title>"#, escape(&s.label));
        for (h, acc) in heads(last).into_iter().enumerate() {
            let y = y_of(acc);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"><title>{} {acc:.4}</title></rect>"#,
                gx + h as f64 * bar_w,
                HEIGHT - MARGIN - y,
                COLORS[h],
                HEADS[h]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + 1.5 * bar_w,
            HEIGHT - MARGIN + 14.0,
            escape(&s.label)
        );
        out.push_str("</g>\n");
    }
    for (h, head) in HEADS.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{}">{head}</text>"#,
            WIDTH - MARGIN - 30.0,
            MARGIN + 13.0 * h as f64,
            COLORS[h]
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render(kind: PlotKind, series: &[Series]) -> Result<String> {
    match kind {
        PlotKind::Curve => curve_svg(series),
        PlotKind::Bar => bar_svg(series),
    }
}

/// Reads the CSVs and writes the plot to `out`.
pub fn emit_plot(kind: PlotKind, csvs: &[impl AsRef<Path>], out: &Path) -> Result<()> {
    let svg = render(kind, &load_series(csvs)?)?;
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}
