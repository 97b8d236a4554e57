//! Static SVG panels. Output depends only on the input values, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use krigrel::{Error, PredictionBand, ReliabilityReport, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

/// Titles and an optional straight line `y = intercept + slope·x`.
#[derive(Debug, Clone, Default)]
pub struct PanelSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub line: Option<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let (x0, x1) = padded_range(xs);
        let (y0, y1) = padded_range(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, spec: &PanelSpec, frame: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<path d="M{l:.2},{t:.2} L{l:.2},{b:.2} L{r:.2},{b:.2}"/>"#);
    for k in 0..TICKS {
        let f = k as f64 / (TICKS - 1) as f64;
        let xv = frame.x0 + f * (frame.x1 - frame.x0);
        let yv = frame.y0 + f * (frame.y1 - frame.y0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(svg, r#"<path d="M{px:.2},{b:.2} L{px:.2},{:.2}"/>"#, b + 4.0);
        let _ = writeln!(svg, r#"<path d="M{l:.2},{py:.2} L{:.2},{py:.2}"/>"#, l - 4.0);
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="tick-labels" fill="black">"#);
    for k in 0..TICKS {
        let f = k as f64 / (TICKS - 1) as f64;
        let xv = frame.x0 + f * (frame.x1 - frame.x0);
        let yv = frame.y0 + f * (frame.y1 - frame.y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(xv),
            b + 16.0,
            label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 6.0,
            frame.py(yv) + 4.0,
            label(yv)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(&spec.y_label)
    );
}

/// Scatter panel with one circle per finite point and the optional line.
pub fn emit_svg_panel(points: &[(f64, f64)], spec: &PanelSpec) -> Result<String> {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Input("cannot plot a panel without finite points".into()));
    }
    let frame = Frame::new(finite.iter().map(|p| p.0), finite.iter().map(|p| p.1));
    let mut svg = String::new();
    open(&mut svg, spec, &frame);
    if let Some((intercept, slope)) = spec.line {
        let (a, b) = (frame.x0, frame.x1);
        let _ = writeln!(
            svg,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="1.5"/>"#,
            frame.px(a),
            frame.py(intercept + slope * a),
            frame.px(b),
            frame.py(intercept + slope * b)
        );
    }
    let _ = writeln!(svg, r#"<g class="points" fill="steelblue">"#);
    for (x, y) in &finite {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, frame.px(*x), frame.py(*y));
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// `E` against n on linear axes.
pub fn report_panel(report: &ReliabilityReport, title: &str, y_label: &str) -> Result<String> {
    let points: Vec<(f64, f64)> = report.rows.iter().map(|(n, e)| (*n as f64, *e)).collect();
    let spec = PanelSpec { title: title.into(), x_label: "n".into(), y_label: y_label.into(), line: None };
    emit_svg_panel(&points, &spec)
}

/// `log E` against `log n` with the least-squares line.
pub fn loglog_panel(report: &ReliabilityReport, title: &str) -> Result<String> {
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(n, e)| ((*n as f64).ln(), e.ln()))
        .collect();
    let line = report.fit.map(|f| (f.intercept, f.slope));
    let spec = PanelSpec { title: title.into(), x_label: "log n".into(), y_label: "log E".into(), line };
    emit_svg_panel(&points, &spec)
}

/// One-dimensional band: shaded interval, mean curve and optional truth.
pub fn band_panel(band: &PredictionBand, truth: Option<&[f64]>, title: &str) -> Result<String> {
    if band.is_empty() {
        return Err(Error::Input("cannot plot an empty band".into()));
    }
    if band.points.iter().any(|p| p.len() != 1) {
        return Err(Error::Shape("band plots need one-dimensional points".into()));
    }
    if let Some(t) = truth {
        if t.len() != band.len() {
            return Err(Error::Input(format!("{} true values for {} band points", t.len(), band.len())));
        }
    }
    let mut order: Vec<usize> = (0..band.len()).collect();
    order.sort_by(|&a, &b| band.points[a][0].total_cmp(&band.points[b][0]));
    let xs = order.iter().map(|&i| band.points[i][0]);
    let ys = (0..band.len()).flat_map(|i| [band.lo(i), band.hi(i)]).chain(truth.unwrap_or(&[]).iter().copied());
    let frame = Frame::new(xs, ys.filter(|v| v.is_finite()));
    let spec = PanelSpec { title: title.into(), x_label: "x".into(), y_label: "f".into(), line: None };
    let mut svg = String::new();
    open(&mut svg, &spec, &frame);

    let path = |values: &dyn Fn(usize) -> f64, idx: &mut dyn Iterator<Item = usize>| -> String {
        idx.map(|i| format!("{:.2},{:.2}", frame.px(band.points[i][0]), frame.py(values(i))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let upper = path(&|i| band.hi(i), &mut order.iter().copied());
    let lower = path(&|i| band.lo(i), &mut order.iter().rev().copied());
    let _ = writeln!(svg, r#"<polygon class="band" points="{upper} {lower}" fill="lightsteelblue" stroke="none"/>"#);
    let mean = path(&|i| band.means[i], &mut order.iter().copied());
    let _ = writeln!(svg, r#"<polyline class="mean" points="{mean}" fill="none" stroke="navy" stroke-width="1.5"/>"#);
    if let Some(t) = truth {
        let truth_path = path(&|i| t[i], &mut order.iter().copied());
        let _ = writeln!(
            svg,
            r#"<polyline class="truth" points="{truth_path}" fill="none" stroke="black" stroke-dasharray="4 3"/>"#
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}
