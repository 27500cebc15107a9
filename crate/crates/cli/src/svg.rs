//! Minimal static line charts: theory curve per δ plus empirical means
//! with ±1 standard-error bars, against λ.

use std::fmt::Write;

use rlr_core::empirical::{Stat, Summary};
use rlr_core::TheoryReport;

use crate::run::CellResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Metric {
    pub name: &'static str,
    pub label: &'static str,
    theory: fn(&TheoryReport) -> Option<f64>,
    empirical: fn(&Summary) -> Option<Stat>,
}

pub const METRICS: &[Metric] = &[
    Metric {
        name: "alpha",
        label: "correlation α",
        theory: |t| Some(t.correlation),
        empirical: |s| s.alpha,
    },
    Metric {
        name: "sigma2",
        label: "variance σ²",
        theory: |t| Some(t.variance),
        empirical: |s| s.sigma2,
    },
    Metric {
        name: "mse",
        label: "MSE",
        theory: |t| Some(t.mse_raw),
        empirical: |s| s.mse_raw,
    },
    Metric {
        name: "e1",
        label: "false alarm E1",
        theory: |t| t.support.map(|s| s.e1),
        empirical: |s| s.e1,
    },
    Metric {
        name: "e2",
        label: "misdetection E2",
        theory: |t| t.support.map(|s| s.e2),
        empirical: |s| s.e2,
    },
];

struct Series {
    delta: f64,
    curve: Vec<(f64, f64)>,
    points: Vec<(f64, f64, f64)>,
}

fn collect(metric: &Metric, cells: &[CellResult]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for cell in cells {
        let delta = cell.spec.delta;
        if out.last().map(|s| s.delta) != Some(delta) {
            out.push(Series {
                delta,
                curve: Vec::new(),
                points: Vec::new(),
            });
        }
        let series = out.last_mut().unwrap();
        let lambda = cell.spec.lambda;
        if let Some(y) = cell.theory.as_ref().ok().and_then(metric.theory).filter(|y| y.is_finite()) {
            series.curve.push((lambda, y));
        }
        let stat = cell
            .empirical
            .as_ref()
            .and_then(|e| e.as_ref().ok())
            .and_then(metric.empirical);
        if let Some(stat) = stat.filter(|s| s.mean.is_finite()) {
            let se = if stat.se.is_finite() { stat.se } else { 0.0 };
            series.points.push((lambda, stat.mean, se));
        }
    }
    out
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    Some((lo - pad, hi + pad))
}

/// `None` when the metric has no data in any cell.
pub fn render(metric: &Metric, cells: &[CellResult]) -> Option<String> {
    let series = collect(metric, cells);
    let xs = series
        .iter()
        .flat_map(|s| s.curve.iter().map(|c| c.0).chain(s.points.iter().map(|p| p.0)));
    let (x0, x1) = range(xs)?;
    let ys = series.iter().flat_map(|s| {
        s.curve
            .iter()
            .map(|c| c.1)
            .chain(s.points.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]))
    });
    let (y0, y1) = range(ys)?;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(fx),
            bottom + 18.0,
            fx
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            left - 6.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">λ</text>"#,
        (left + right) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(svg, r#"<text x="{left}" y="{:.1}">{}</text>"#, top - 20.0, metric.label);

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.curve.is_empty() {
            let d: Vec<String> = s.curve.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" stroke="{color}" stroke-dasharray="6 4" fill="none"/>"#,
                d.join(" ")
            );
        }
        for (x, y, se) in &s.points {
            let (px, lo, hi) = (sx(*x), sy(y - se), sy(y + se));
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="{color}"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sy(*y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">δ = {}</text>"#,
            right - 70.0,
            top + 16.0 * i as f64,
            s.delta
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}
