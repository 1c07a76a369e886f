//! Log-log SVG of mean parallel rounds against `n`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{CellSummary, ExperimentTable};
use crate::sim::InitKind;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 4] = ["#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

struct Style {
    color: &'static str,
    square: bool,
}

fn style_for(dynamics: &str, others: &mut Vec<String>) -> Style {
    if dynamics == "voter" {
        return Style {
            color: "#1f77b4",
            square: false,
        };
    }
    if dynamics == "trend" || dynamics.starts_with("trend:") {
        return Style {
            color: "#d62728",
            square: true,
        };
    }
    let idx = match others.iter().position(|d| d == dynamics) {
        Some(i) => i,
        None => {
            others.push(dynamics.to_string());
            others.len() - 1
        }
    };
    Style {
        color: PALETTE[idx % PALETTE.len()],
        square: false,
    }
}

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn fit(points: &[(f64, f64)]) -> Self {
        if points.is_empty() {
            return Self {
                x_min: 3.0,
                x_max: 10.0,
                y_min: 0.0,
                y_max: 3.0,
            };
        }
        let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
            points.iter().map(pick).fold(init, f)
        };
        let mut x_min = fold(f64::min, f64::INFINITY, |p| p.0).floor();
        let mut x_max = fold(f64::max, f64::NEG_INFINITY, |p| p.0).ceil();
        let y_min = fold(f64::min, f64::INFINITY, |p| p.1).floor();
        let mut y_max = fold(f64::max, f64::NEG_INFINITY, |p| p.1).ceil();
        if x_max <= x_min {
            x_min -= 1.0;
            x_max += 1.0;
        }
        if y_max <= y_min {
            y_max = y_min + 1.0;
        }
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Log coordinates `(log2 n, log10 mean)`; cells with a non-positive mean are
/// left out.
fn log_point(cell: &CellSummary) -> Option<(f64, f64)> {
    (cell.mean_parallel_rounds > 0.0)
        .then(|| ((cell.n as f64).log2(), cell.mean_parallel_rounds.log10()))
}

type Line = (String, InitKind, Vec<(f64, f64)>);

/// One line per (dynamics, init): solid for uniform, dashed otherwise.
pub fn render_svg(cells: &[CellSummary]) -> String {
    let mut series: Vec<Line> = Vec::new();
    for cell in cells {
        let Some(point) = log_point(cell) else {
            continue;
        };
        match series
            .iter_mut()
            .find(|(d, i, _)| *d == cell.dynamics && *i == cell.init)
        {
            Some((_, _, points)) => points.push(point),
            None => series.push((cell.dynamics.clone(), cell.init, vec![point])),
        }
    }
    for (_, _, points) in &mut series {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.2.iter().copied()).collect();
    let axes = Axes::fit(&all);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    let (x0, x1) = (axes.px(axes.x_min), axes.px(axes.x_max));
    let (y0, y1) = (axes.py(axes.y_min), axes.py(axes.y_max));
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y1:.2} V{y0:.2} H{x1:.2}" fill="none" stroke="black"/>"#
    );
    for i in (axes.x_min as i64)..=(axes.x_max as i64) {
        let x = axes.px(i as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">2<tspan baseline-shift="super" font-size="9">{i}</tspan></text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
    }
    for k in (axes.y_min as i64)..=(axes.y_max as i64) {
        let y = axes.py(k as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">10<tspan baseline-shift="super" font-size="9">{k}</tspan></text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">mean parallel rounds</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut others = Vec::new();
    for (idx, (dynamics, init, points)) in series.iter().enumerate() {
        let style = style_for(dynamics, &mut others);
        let dash = if *init == InitKind::Uniform {
            ""
        } else {
            r#" stroke-dasharray="6 4""#
        };
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            coords.join(" "),
            style.color
        );
        for &(x, y) in points {
            marker(&mut svg, &style, axes.px(x), axes.py(y));
        }

        let ly = TOP + 10.0 + 18.0 * idx as f64;
        let lx = LEFT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 30.0,
            style.color
        );
        marker(&mut svg, &style, lx + 15.0, ly);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{} ({})</text>"#,
            lx + 38.0,
            ly + 4.0,
            escape(dynamics),
            init
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn marker(svg: &mut String, style: &Style, x: f64, y: f64) {
    if style.square {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="{}"/>"#,
            x - 3.5,
            y - 3.5,
            style.color
        );
    } else {
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{}"/>"#,
            style.color
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Reads an experiment CSV and writes its plot.
pub fn plot_csv(csv: &Path, svg: &Path) -> Result<()> {
    let table = ExperimentTable::read_csv_file(csv)?;
    std::fs::write(svg, render_svg(&table.summarize())).map_err(|e| Error::io(svg, e))
}
