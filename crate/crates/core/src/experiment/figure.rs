//! SVG density figure: limit normal, one curve per estimator, vertical median lines.

use std::fmt::Write as _;

use crate::special::normal_pdf;

use super::density::KdeCurve;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// A named density with its median.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub curve: KdeCurve,
    pub median: f64,
}

struct Style {
    color: &'static str,
    dash: &'static str,
}

const LIMIT_STYLE: Style = Style { color: "#d62728", dash: "" };
const SERIES_STYLES: [Style; 4] = [
    Style { color: "#2ca02c", dash: "8,5" },
    Style { color: "#1f77b4", dash: "2,4" },
    Style { color: "#9467bd", dash: "10,3,2,3" },
    Style { color: "#ff7f0e", dash: "4,2" },
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Renders the densities; `limit_sd` adds the `N(0, sd²)` curve and its median at 0.
pub fn render_density_figure(title: &str, x_label: &str, series: &[Series], limit_sd: Option<f64>) -> String {
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_hi: f64 = 0.0;
    for s in series {
        x_lo = x_lo.min(s.curve.grid[0]);
        x_hi = x_hi.max(s.curve.grid[s.curve.grid.len() - 1]);
        y_hi = y_hi.max(s.curve.density.iter().cloned().fold(0.0, f64::max));
    }
    let limit_curve = limit_sd.map(|sd| {
        let (lo, hi) = if x_lo.is_finite() { (x_lo.min(-4.0 * sd), x_hi.max(4.0 * sd)) } else { (-4.0 * sd, 4.0 * sd) };
        let grid: Vec<f64> = (0..400).map(|i| lo + (hi - lo) * i as f64 / 399.0).collect();
        let density: Vec<f64> = grid.iter().map(|x| normal_pdf(x / sd) / sd).collect();
        (grid, density)
    });
    if let Some((g, d)) = &limit_curve {
        x_lo = x_lo.min(g[0]);
        x_hi = x_hi.max(g[g.len() - 1]);
        y_hi = y_hi.max(d.iter().cloned().fold(0.0, f64::max));
    }
    if !x_lo.is_finite() {
        x_lo = -1.0;
        x_hi = 1.0;
    }
    if y_hi <= 0.0 {
        y_hi = 1.0;
    }
    y_hi *= 1.08;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - y / y_hi * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="28" text-anchor="middle" font-size="18">{}</text>"#, WIDTH / 2.0, escape(title));

    // Axes and ticks.
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}"/>"#, x0 + plot_w);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_TOP}"/>"#);
    let _ = writeln!(svg, "</g>");
    for t in nice_ticks(x_lo, x_hi, 8) {
        let x = px(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, y0 + 20.0, fmt_tick(t));
    }
    for t in nice_ticks(0.0, y_hi, 6) {
        let y = py(t);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="12">{}</text>"#, x0 - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {})">density</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    let polyline = |grid: &[f64], density: &[f64]| -> String {
        grid.iter().zip(density).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect::<Vec<_>>().join(" ")
    };
    let mut legend: Vec<(String, &Style)> = Vec::new();
    if let Some((g, d)) = &limit_curve {
        let sd = limit_sd.unwrap();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve limit" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            LIMIT_STYLE.color,
            polyline(g, d)
        );
        let _ = writeln!(
            svg,
            r#"<line class="median limit" x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="{3}" stroke-width="1.5"/>"#,
            px(0.0),
            y0,
            MARGIN_TOP,
            LIMIT_STYLE.color
        );
        legend.push((format!("limit N(0, {:.4})", sd * sd), &LIMIT_STYLE));
    }
    for (k, s) in series.iter().enumerate() {
        let style = &SERIES_STYLES[k % SERIES_STYLES.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="curve estimator" fill="none" stroke="{}" stroke-width="2" stroke-dasharray="{}" points="{}"/>"#,
            style.color,
            style.dash,
            polyline(&s.curve.grid, &s.curve.density)
        );
        let _ = writeln!(
            svg,
            r#"<line class="median estimator" x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="{3}" stroke-width="1.5" stroke-dasharray="{4}"/>"#,
            px(s.median),
            y0,
            MARGIN_TOP,
            style.color,
            style.dash
        );
        legend.push((s.label.clone(), style));
    }

    let (lx, ly) = (WIDTH - MARGIN_RIGHT - 210.0, MARGIN_TOP + 10.0);
    let _ = writeln!(svg, r#"<g class="legend">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{lx}" y="{ly}" width="200" height="{}" fill="white" stroke="gray"/>"#,
        10.0 + 22.0 * legend.len() as f64
    );
    for (i, (label, style)) in legend.iter().enumerate() {
        let y = ly + 20.0 + 22.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2" stroke-dasharray="{}"/>"#,
            lx + 10.0,
            lx + 45.0,
            style.color,
            style.dash
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="13">{}</text>"#, lx + 52.0, y + 4.0, escape(label));
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}
