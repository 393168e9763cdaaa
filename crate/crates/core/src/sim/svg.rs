//! Self-contained SVG rendering of one or more trajectory logs.
//!
//! The drawing has two panels: the planar trajectory with obstacles, start
//! marker, and goal cross, and the polar coordinates against time. Planar
//! geometry lives in a world-coordinate group so obstacle circles carry the
//! scenario's literal center and radius attributes.

use std::fmt::Write as _;
use std::path::Path;

use super::{SimError, TrajectoryLog};
use crate::scenario::Scenario;

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 880.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
const MAX_POINTS: usize = 1500;

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

struct Mapper {
    k: f64,
    tx: f64,
    ty: f64,
}

impl Mapper {
    fn x(&self, wx: f64) -> f64 {
        self.tx + self.k * wx
    }

    fn y(&self, wy: f64) -> f64 {
        self.ty - self.k * wy
    }
}

/// Renders `logs` (label, trajectory) over the scenario geometry to `path`.
pub fn export_svg(
    logs: &[(&str, &TrajectoryLog)],
    scenario: &Scenario,
    path: &Path,
) -> Result<(), SimError> {
    let svg = svg_string(logs, scenario);
    std::fs::write(path, svg).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn svg_string(logs: &[(&str, &TrajectoryLog)], scenario: &Scenario) -> String {
    let mut out = String::with_capacity(64 * 1024);
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let plan = Frame { left: 40.0, top: 20.0, width: 800.0, height: 540.0 };
    let series = Frame { left: 70.0, top: 620.0, width: 770.0, height: 200.0 };
    draw_plan_panel(&mut out, logs, scenario, &plan);
    draw_series_panel(&mut out, logs, &series);
    out.push_str("</svg>\n");
    out
}

fn draw_plan_panel(out: &mut String, logs: &[(&str, &TrajectoryLog)], sc: &Scenario, f: &Frame) {
    let map = plan_mapper(logs, sc, f);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">trajectory</text>",
        f.left,
        f.top - 6.0
    );
    let _ = writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        f.left, f.top, f.width, f.height
    );

    let _ = writeln!(
        out,
        "<g transform=\"translate({} {}) scale({} -{})\">",
        map.tx, map.ty, map.k, map.k
    );
    for o in &sc.obstacles {
        let _ = writeln!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#d62728\" fill-opacity=\"0.15\" \
             stroke=\"#d62728\" vector-effect=\"non-scaling-stroke\"/>",
            o.cx, o.cy, o.radius
        );
    }
    for (i, (_, log)) in logs.iter().enumerate() {
        if log.rows.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (j, row) in decimate(&log.rows).enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.5} {:.5} ", row.x, row.y);
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" \
             vector-effect=\"non-scaling-stroke\"/>",
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }
    out.push_str("</g>\n");

    let (sx, sy) = (map.x(sc.init.x), map.y(sc.init.y));
    let _ = writeln!(
        out,
        "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"4\" fill=\"#333\"/>\
         <text x=\"{:.1}\" y=\"{:.1}\">start</text>",
        sx + 7.0,
        sy + 4.0
    );
    let (gx, gy) = (map.x(0.0), map.y(0.0));
    let _ = writeln!(
        out,
        "<path d=\"M{x0:.1} {gy:.1} H{x1:.1} M{gx:.1} {y0:.1} V{y1:.1}\" stroke=\"#333\" \
         stroke-width=\"1.5\"/><text x=\"{tx:.1}\" y=\"{ty:.1}\">goal</text>",
        x0 = gx - 6.0,
        x1 = gx + 6.0,
        y0 = gy - 6.0,
        y1 = gy + 6.0,
        tx = gx + 9.0,
        ty = gy + 4.0
    );

    for (i, (label, _)) in logs.iter().enumerate() {
        let y = f.top + 16.0 + 18.0 * i as f64;
        let x = f.left + f.width - 180.0;
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\">{}</text>",
            x + 26.0,
            PALETTE[i % PALETTE.len()],
            x + 32.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn plan_mapper(logs: &[(&str, &TrajectoryLog)], sc: &Scenario, f: &Frame) -> Mapper {
    let mut xs = vec![0.0, sc.init.x];
    let mut ys = vec![0.0, sc.init.y];
    for o in &sc.obstacles {
        xs.push(o.cx - o.radius);
        xs.push(o.cx + o.radius);
        ys.push(o.cy - o.radius);
        ys.push(o.cy + o.radius);
    }
    for (_, log) in logs {
        for row in &log.rows {
            xs.push(row.x);
            ys.push(row.y);
        }
    }
    let (x_min, x_max) = padded_span(&xs, 0.08);
    let (y_min, y_max) = padded_span(&ys, 0.08);
    let k = (f.width / (x_max - x_min)).min(f.height / (y_max - y_min));
    let tx = f.left + 0.5 * (f.width - k * (x_max - x_min)) - k * x_min;
    let ty = f.top + 0.5 * (f.height - k * (y_max - y_min)) + k * y_max;
    Mapper { k, tx, ty }
}

fn draw_series_panel(out: &mut String, logs: &[(&str, &TrajectoryLog)], f: &Frame) {
    let mut t_all = Vec::new();
    let mut values = Vec::new();
    for (_, log) in logs {
        for row in &log.rows {
            t_all.push(row.t);
            values.extend_from_slice(&[row.rho, row.alpha, row.psi]);
        }
    }
    let (t0, t1) = padded_span(&t_all, 0.0);
    let (v0, v1) = padded_span(&values, 0.05);
    let px = |t: f64| f.left + (t - t0) / (t1 - t0) * f.width;
    let py = |v: f64| f.top + f.height - (v - v0) / (v1 - v0) * f.height;

    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">polar coordinates</text>",
        f.left,
        f.top - 24.0
    );
    for (i, (name, dash)) in [("rho", "none"), ("alpha", "6 3"), ("psi", "2 3")]
        .iter()
        .enumerate()
    {
        let x = f.left + 140.0 + 90.0 * i as f64;
        let y = f.top - 28.0;
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#555\" \
             stroke-width=\"2\" stroke-dasharray=\"{dash}\"/>\
             <text x=\"{}\" y=\"{}\" fill=\"#555\">{name}</text>",
            x + 26.0,
            x + 32.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        f.left, f.top, f.width, f.height
    );
    if v0 < 0.0 && v1 > 0.0 {
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            f.left,
            f.left + f.width,
            y = py(0.0)
        );
    }

    for (i, (_, log)) in logs.iter().enumerate() {
        if log.rows.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        for (pick, dash) in [
            (0usize, "none"),
            (1, "6 3"),
            (2, "2 3"),
        ] {
            let mut d = String::new();
            for (j, row) in decimate(&log.rows).enumerate() {
                let value = [row.rho, row.alpha, row.psi][pick];
                let cmd = if j == 0 { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{:.1} {:.1} ", px(row.t), py(value));
            }
            let _ = writeln!(
                out,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"{dash}\"/>",
                d.trim_end()
            );
        }
    }

    let labels = [
        (f.left, f.top + f.height + 14.0, format!("{t0:.2}")),
        (f.left + f.width - 30.0, f.top + f.height + 14.0, format!("{t1:.2}")),
        (f.left - 44.0, f.top + f.height, format!("{v0:.2}")),
        (f.left - 44.0, f.top + 10.0, format!("{v1:.2}")),
    ];
    for (x, y, text) in labels {
        let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{y:.1}\">{text}</text>");
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\">t [s]</text>",
        f.left + 0.5 * f.width,
        f.top + f.height + 14.0
    );
}

fn padded_span(values: &[f64], pad: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    let span = (hi - lo).max(1e-9);
    (lo - pad * span, hi + pad * span + 1e-9)
}

fn decimate(rows: &[super::TrajectoryRow]) -> impl Iterator<Item = &super::TrajectoryRow> {
    let step = rows.len().div_ceil(MAX_POINTS).max(1);
    let last = rows.len().saturating_sub(1);
    rows.iter()
        .enumerate()
        .filter(move |(i, _)| i % step == 0 || *i == last)
        .map(|(_, r)| r)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
