//! SVG line plots of `log10 d(h, z)` per candidate.

use crate::error::{invalid, Result};
use crate::trajectory::TrajectoryReport;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
/// Distances below this are drawn at the floor.
const FLOOR: f64 = 1e-16;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Renders one polyline per candidate `z`. Output depends only on the
/// report, byte for byte.
pub fn distance_plot(report: &TrajectoryReport) -> Result<String> {
    if report.distances.is_empty() {
        return invalid("trajectory report has no distances to plot");
    }
    let mut zs: Vec<f64> = Vec::new();
    for d in &report.distances {
        if !zs.contains(&d.z) {
            zs.push(d.z);
        }
    }
    let ld = |d: f64| d.max(FLOOR).log10();
    let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in &report.distances {
        if !(d.h.is_finite() && d.d.is_finite()) {
            return invalid(format!("non-finite distance entry at h = {}", d.h));
        }
        hmin = hmin.min(d.h);
        hmax = hmax.max(d.h);
        ymin = ymin.min(ld(d.d));
        ymax = ymax.max(ld(d.d));
    }
    let (ymin, ymax) = (ymin.floor(), ymax.ceil().max(ymin.floor() + 1.0));
    let hspan = if hmax > hmin { hmax - hmin } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |h: f64| LEFT + (h - hmin) / hspan * pw;
    let py = |y: f64| TOP + (ymax - y) / (ymax - ymin) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let mut y = ymin;
    while y <= ymax {
        let yy = py(y);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, yy + 4.0, y as i64);
        y += 1.0;
    }
    for k in 0..=4 {
        let h = hmin + hspan * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#, px(h), TOP + ph + 18.0, h);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">shift h</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">d(h, z)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (k, &z) in zs.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = report.distances.iter().filter(|d| d.z == z).map(|d| format!("{:.2},{:.2}", px(d.h), py(ld(d.d)))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 16.0 * (k as f64 + 1.0);
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let mark = if report.detected_z == Some(z) { " (limit)" } else { "" };
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">z = {z:.6}{mark}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
