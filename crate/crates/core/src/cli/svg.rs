//! Small-multiple line charts of rejection rate against zero rate.
//!
//! One figure per condition: a grid of 720x480 panels with a column per `n`
//! and a row per count-effect value, one series per test.

use std::fmt::Write;

use super::ResultRow;
use crate::harness::{Condition, TestName};

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
/// Nominal level marked on null-condition figures.
const REFERENCE_LEVEL: f64 = 0.05;

const COLORS: [&str; 7] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

fn color(test: TestName) -> &'static str {
    COLORS[TestName::ALL.iter().position(|&t| t == test).unwrap_or(0)]
}

/// The whole SVG document for one condition.
pub fn render_condition(condition: Condition, rows: &[ResultRow]) -> String {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let betas = distinct(rows.iter().map(|r| r.beta1).collect());
    let zero_rates = distinct(rows.iter().map(|r| r.zero_rate).collect());

    let width = PANEL_W * ns.len() as f64;
    let height = PANEL_H * betas.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (row, &beta1) in betas.iter().enumerate() {
        for (col, &n) in ns.iter().enumerate() {
            let cell: Vec<&ResultRow> =
                rows.iter().filter(|r| r.n == n && (r.beta1 - beta1).abs() < 1e-12).collect();
            panel(&mut s, condition, beta1, n, &zero_rates, &cell, col as f64 * PANEL_W, row as f64 * PANEL_H);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[allow(clippy::too_many_arguments)]
fn panel(s: &mut String, condition: Condition, beta1: f64, n: usize, xs: &[f64], rows: &[&ResultRow], ox: f64, oy: f64) {
    let plot_w = PANEL_W - LEFT - RIGHT;
    let plot_h = PANEL_H - TOP - BOTTOM;
    let (x_lo, x_hi) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.1, a + 0.1),
        _ => (0.0, 1.0),
    };
    let pad = 0.05 * (x_hi - x_lo);
    let sx = |x: f64| ox + LEFT + (x - x_lo + pad) / (x_hi - x_lo + 2.0 * pad) * plot_w;
    let sy = |y: f64| oy + TOP + (1.0 - y) * plot_h;

    let _ = writeln!(s, r#"<g class="panel" data-n="{n}" data-beta1="{beta1}">"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" font-weight="bold">{condition}, b1 = {beta1}, n = {n}</text>"#,
        ox + LEFT,
        oy + TOP - 18.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#333"/>"##,
        ox + LEFT,
        oy + TOP
    );

    for k in 0..=4 {
        let y = k as f64 * 0.25;
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"##,
            ox + LEFT,
            ox + LEFT + plot_w,
            ox + LEFT - 6.0,
            py + 4.0
        );
    }
    for &x in xs {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{x}</text>"##,
            oy + TOP + plot_h,
            oy + TOP + plot_h + 5.0,
            oy + TOP + plot_h + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">zero rate</text>"#,
        ox + LEFT + plot_w / 2.0,
        oy + PANEL_H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">rejection rate</text>"#,
        ox + 18.0,
        oy + TOP + plot_h / 2.0,
        ox + 18.0,
        oy + TOP + plot_h / 2.0
    );

    if condition == Condition::C4 {
        let py = sy(REFERENCE_LEVEL);
        let _ = writeln!(
            s,
            r##"<line class="reference-line" data-level="{REFERENCE_LEVEL}" x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#000" stroke-dasharray="6 4"/>"##,
            ox + LEFT,
            ox + LEFT + plot_w
        );
    }

    for (k, test) in TestName::ALL.into_iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.test == test && r.rejection_rate.is_finite())
            .map(|r| (r.zero_rate, r.rejection_rate))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = color(test);
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-test="{test}" points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                path.join(" ")
            );
            for &(x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(x), sy(y));
            }
        }
        let ly = oy + TOP + 10.0 + 20.0 * k as f64;
        let lx = ox + PANEL_W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/><text class="legend" x="{:.1}" y="{:.1}">{test}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</g>\n");
}
