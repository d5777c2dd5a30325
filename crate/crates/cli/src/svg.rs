//! Hand-written SVG for route maps and reward curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hqrl_core::training::{moving_average, SMOOTHING_WINDOW};
use hqrl_core::{TrainingLog, VrpInstance};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

const MAP_SIZE: f64 = 520.0;
const MAP_MARGIN: f64 = 30.0;

const CHART_W: f64 = 720.0;
const CHART_H: f64 = 420.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 170.0;
const PLOT_TOP: f64 = 30.0;
const PLOT_BOTTOM: f64 = 50.0;

/// One labelled reward series. Raw per-episode values; smoothing happens
/// when the chart is drawn.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rewards: Vec<f64>,
}

impl From<&TrainingLog> for Curve {
    fn from(log: &TrainingLog) -> Self {
        Curve { label: log.config.method.tag().to_string(), rewards: log.rewards() }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn map_point(p: [f64; 2]) -> (f64, f64) {
    let span = MAP_SIZE - 2.0 * MAP_MARGIN;
    (MAP_MARGIN + p[0] * span, MAP_SIZE - MAP_MARGIN - p[1] * span)
}

fn star(cx: f64, cy: f64, outer: f64, inner: f64) -> String {
    (0..10)
        .map(|k| {
            let r = if k % 2 == 0 { outer } else { inner };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn arrow(from: (f64, f64), to: (f64, f64), fill: &str) -> Option<String> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = dx.hypot(dy);
    if len < 1e-9 {
        return None;
    }
    let (ux, uy) = (dx / len, dy / len);
    let (mx, my) = ((from.0 + to.0) / 2.0, (from.1 + to.1) / 2.0);
    let (size, half) = (9.0, 4.5);
    let tip = (mx + ux * size / 2.0, my + uy * size / 2.0);
    let back = (mx - ux * size / 2.0, my - uy * size / 2.0);
    Some(format!(
        r#"<path class="arrow" d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="{fill}"/>"#,
        tip.0,
        tip.1,
        back.0 - uy * half,
        back.1 + ux * half,
        back.0 + uy * half,
        back.1 - ux * half,
    ))
}

fn check_routes(instance: &VrpInstance, routes: &[Vec<usize>]) -> Result<()> {
    let n = instance.n_customers();
    let mut seen = vec![false; n];
    for &c in routes.iter().flatten() {
        if c >= n {
            bail!("route visits customer {c} but the instance has {n}");
        }
        if std::mem::replace(&mut seen[c], true) {
            bail!("customer {c} appears in more than one position");
        }
    }
    Ok(())
}

/// Depot as a gold star, one coloured polyline per non-empty route with an
/// arrow on every leg, and customers as labelled dots.
pub fn route_svg(instance: &VrpInstance, routes: &[Vec<usize>]) -> Result<String> {
    check_routes(instance, routes)?;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{MAP_SIZE}" height="{MAP_SIZE}" viewBox="0 0 {MAP_SIZE} {MAP_SIZE}" font-family="sans-serif" font-size="11">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    let depot = map_point(instance.depot());
    let customers = instance.customers();
    for (v, route) in routes.iter().enumerate().filter(|(_, r)| !r.is_empty()) {
        let c = color(v);
        let mut pts = vec![depot];
        pts.extend(route.iter().map(|&i| map_point(customers[i])));
        pts.push(depot);
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            s,
            r#"<polyline class="route" data-vehicle="{v}" points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            coords.join(" ")
        )?;
        for w in pts.windows(2) {
            if let Some(a) = arrow(w[0], w[1], c) {
                writeln!(s, "{a}")?;
            }
        }
    }
    for (i, &p) in customers.iter().enumerate() {
        let (x, y) = map_point(p);
        writeln!(s, r##"<circle class="customer" cx="{x:.2}" cy="{y:.2}" r="5" fill="#333"/>"##)?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{i}</text>"#, x + 7.0, y - 7.0)?;
    }
    writeln!(
        s,
        r##"<polygon class="depot" points="{}" fill="gold" stroke="#8a6d00" stroke-width="1"/>"##,
        star(depot.0, depot.1, 12.0, 5.0)
    )?;
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_route_svg(instance: &VrpInstance, routes: &[Vec<usize>], path: &Path) -> Result<()> {
    fs::write(path, route_svg(instance, routes)?).with_context(|| format!("writing {}", path.display()))
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Smoothed reward against episode for each curve, with axes, labels and a
/// legend. A flat series is drawn through the middle of the plot.
pub fn curve_svg(curves: &[Curve]) -> Result<String> {
    if curves.is_empty() {
        bail!("no curves to plot");
    }
    if let Some(c) = curves.iter().find(|c| c.rewards.is_empty()) {
        bail!("curve {:?} has no episodes", c.label);
    }
    let smooth: Vec<Vec<f64>> = curves.iter().map(|c| moving_average(&c.rewards, SMOOTHING_WINDOW)).collect();
    let all = smooth.iter().flatten().copied();
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        bail!("rewards must be finite");
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let max_len = smooth.iter().map(Vec::len).max().unwrap_or(1);
    let x_span = (max_len.max(2) - 1) as f64;
    let (x0, x1) = (PLOT_LEFT, CHART_W - PLOT_RIGHT);
    let (y0, y1) = (CHART_H - PLOT_BOTTOM, PLOT_TOP);
    let sx = |i: usize| x0 + (x1 - x0) * i as f64 / x_span;
    let sy = |v: f64| y0 - (y0 - y1) * (v - lo) / (hi - lo);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_W}" height="{CHART_H}" viewBox="0 0 {CHART_W} {CHART_H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#)?;
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#)?;
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#)?;
    s.push_str("</g>\n");
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = sy(v);
        writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#000"/>"##, x0 - 4.0)?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, tick_label(v))?;
        let e = ((max_len - 1) as f64 * k as f64 / 4.0).round() as usize;
        let x = sx(e);
        writeln!(s, r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, y0 + 4.0)?;
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#, y0 + 18.0)?;
    }
    writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">Episode</text>"#,
        (x0 + x1) / 2.0,
        CHART_H - 10.0
    )?;
    writeln!(
        s,
        r#"<text class="y-label" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Reward ({SMOOTHING_WINDOW}-episode moving average)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )?;
    for (i, (curve, values)) in curves.iter().zip(&smooth).enumerate() {
        let pts: Vec<String> = values.iter().enumerate().map(|(e, &v)| format!("{:.2},{:.2}", sx(e), sy(v))).collect();
        writeln!(
            s,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            color(i)
        )?;
        let ly = PLOT_TOP + 10.0 + 20.0 * i as f64;
        let lx = x1 + 15.0;
        writeln!(s, r#"<g class="legend-entry">"#)?;
        writeln!(s, r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="4" fill="{}"/>"#, ly - 4.0, color(i))?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 20.0, ly + 2.0, escape(&curve.label))?;
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_curve_svg(logs: &[TrainingLog], path: &Path) -> Result<()> {
    let curves: Vec<Curve> = logs.iter().map(Curve::from).collect();
    write_curves(&curves, path)
}

pub fn write_curves(curves: &[Curve], path: &Path) -> Result<()> {
    fs::write(path, curve_svg(curves)?).with_context(|| format!("writing {}", path.display()))
}
