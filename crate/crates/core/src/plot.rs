//! SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::sim::run::LogRow;
use crate::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 40.0;
const TICKS: usize = 5;
/// Series longer than this are decimated to per-bucket extremes.
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Same scale on both axes (path views).
    pub equal_aspect: bool,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            equal_aspect: false,
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

/// Keeps the first, last, and per-bucket min/max points in order.
fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let buckets = MAX_POINTS / 2;
    let size = points.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(MAX_POINTS + 2);
    for chunk in points.chunks(size) {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in chunk.iter().enumerate() {
            if p.1 < chunk[lo].1 {
                lo = i;
            }
            if p.1 > chunk[hi].1 {
                hi = i;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push(chunk[a]);
        if b != a {
            out.push(chunk[b]);
        }
    }
    if out.last() != points.last() {
        out.push(points[points.len() - 1]);
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300_f64.max(1e-12 * hi.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.03 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a standalone SVG 1.1 document.
pub fn render_svg(chart: &Chart) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1) = range(all().map(|p| p.0));
    let (mut y0, mut y1) = range(all().map(|p| p.1));
    if chart.equal_aspect {
        let scale = ((x1 - x0) / plot_w).max((y1 - y0) / plot_h);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        (x0, x1) = (cx - 0.5 * scale * plot_w, cx + 0.5 * scale * plot_w);
        (y0, y1) = (cy - 0.5 * scale * plot_h, cy + 0.5 * scale * plot_h);
    }
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_Y + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>
<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT + 0.5 * plot_w,
        escape(&chart.title)
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(
            svg,
            r##"<line x1="{gx:.2}" y1="{MARGIN_Y}" x2="{gx:.2}" y2="{:.2}" stroke="#dddddd"/>
<text x="{gx:.2}" y="{:.2}" text-anchor="middle">{xv:.3e}</text>
<line x1="{MARGIN_LEFT}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#dddddd"/>
<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3e}</text>"##,
            MARGIN_Y + plot_h,
            MARGIN_Y + plot_h + 16.0,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            gy + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_LEFT + 0.5 * plot_w,
        HEIGHT - 6.0,
        escape(&chart.x_label),
        MARGIN_Y + 0.5 * plot_h,
        MARGIN_Y + 0.5 * plot_h,
        escape(&chart.y_label)
    );
    for (k, s) in chart.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = decimate(&s.points)
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_Y + 14.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"{dash}/>
<text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn time_series(rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.t, f(r))).collect()
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn axis(i: usize) -> String {
    AXES.get(i).map_or_else(|| format!("x{}", i + 1), |s| s.to_string())
}

/// Named charts for one log: path views, tracking errors, actuator forces, Lyapunov function.
pub fn log_charts(rows: &[LogRow], n: usize, m: usize) -> Vec<(String, Chart)> {
    let mut charts = Vec::new();
    let views: Vec<(usize, usize)> = if n >= 3 { vec![(0, 1), (0, 2)] } else { vec![(0, 1)] };
    for (i, j) in views {
        let name = format!("path_{}{}", axis(i), axis(j));
        let mut c = Chart::new(format!("Path, {}-{} view", axis(i), axis(j)), format!("{} [m]", axis(i)), format!("{} [m]", axis(j)))
            .with(Series::new("actual", rows.iter().map(|r| (r.x[i], r.x[j])).collect()))
            .with(Series::new("desired", rows.iter().map(|r| (r.xd[i], r.xd[j])).collect()).dashed());
        c.equal_aspect = true;
        charts.push((name, c));
    }
    let mut err = Chart::new("Tracking error", "t [s]", "error [m]");
    for i in 0..n {
        err = err.with(Series::new(format!("e_{}", axis(i)), time_series(rows, |r| r.e[i])));
    }
    charts.push(("error".into(), err));
    let mut tau = Chart::new("Actuator forces", "t [s]", "tau [N]");
    for i in 0..m {
        tau = tau.with(Series::new(format!("tau_{}", i + 1), time_series(rows, |r| r.tau[i])));
    }
    charts.push(("tau".into(), tau));
    charts.push((
        "lyapunov".into(),
        Chart::new("Lyapunov function", "t [s]", "V").with(Series::new("V", time_series(rows, |r| r.v))),
    ));
    charts
}

/// Per-axis error overlay of two runs of the same scenario.
pub fn error_overlay(n: usize, first: (&str, &[LogRow]), second: (&str, &[LogRow])) -> Chart {
    let mut c = Chart::new(format!("Tracking error, {} vs {}", first.0, second.0), "t [s]", "error [m]");
    for i in 0..n {
        c = c.with(Series::new(format!("{} e_{}", first.0, axis(i)), time_series(first.1, |r| r.e[i])));
    }
    for i in 0..n {
        c = c.with(Series::new(format!("{} e_{}", second.0, axis(i)), time_series(second.1, |r| r.e[i])).dashed());
    }
    c
}

/// Writes one SVG per chart as `<dir>/<stem>_<name>.svg`.
pub fn write_charts(charts: &[(String, Chart)], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(charts.len());
    for (name, chart) in charts {
        let path = dir.join(format!("{stem}_{name}.svg"));
        std::fs::write(&path, render_svg(chart))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> LogRow {
        LogRow {
            t,
            x: vec![t.cos(), t.sin(), 1.0],
            xd: vec![t.cos(), t.sin(), 1.0],
            e: vec![0.01 * t, -0.01 * t, 0.0],
            s: vec![0.0; 3],
            tau: vec![1.0, 2.0, 3.0, 4.0],
            v: (-t).exp(),
            t_hat: 1.0,
        }
    }

    #[test]
    fn decimation_keeps_extremes_and_endpoints() {
        let pts: Vec<_> = (0..100_000).map(|i| (i as f64, if i == 54_321 { 9.0 } else { 0.0 })).collect();
        let d = decimate(&pts);
        assert!(d.len() <= MAX_POINTS + 2);
        assert!(d.contains(&(54_321.0, 9.0)));
        assert_eq!(d.first(), pts.first());
        assert_eq!(d.last(), pts.last());
        assert!(d.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn spatial_log_has_two_path_views() {
        let rows: Vec<_> = (0..50).map(|i| row(i as f64 * 0.1)).collect();
        let names: Vec<_> = log_charts(&rows, 3, 4).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["path_xy", "path_xz", "error", "tau", "lyapunov"]);
    }

    #[test]
    fn svg_is_well_formed_for_flat_series() {
        let c = Chart::new("a < b", "t", "y").with(Series::new("flat", vec![(0.0, 1.0), (1.0, 1.0)]));
        let svg = render_svg(&c);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("version=\"1.1\""));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
