//! Trajectory export: CSV samples and SVG trajectory plots.

use std::fmt::Write as _;

use crate::action::TrigLoop;
use crate::error::{Error, Result};

/// Projection plane for rendering 3-dimensional orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPlane {
    Xy,
    Xz,
    Yz,
}

impl ProjectionPlane {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "xy" => Ok(ProjectionPlane::Xy),
            "xz" => Ok(ProjectionPlane::Xz),
            "yz" => Ok(ProjectionPlane::Yz),
            other => Err(Error::UnsupportedFormat {
                format: format!("plane {other}"),
            }),
        }
    }

    fn axes(&self) -> (usize, usize) {
        match self {
            ProjectionPlane::Xy => (0, 1),
            ProjectionPlane::Xz => (0, 2),
            ProjectionPlane::Yz => (1, 2),
        }
    }
}

/// CSV with header `t,body,x1..xd` and `samples` uniform rows per body.
pub fn export_csv(lp: &TrigLoop, samples: usize) -> Result<String> {
    if samples < 2 {
        return Err(Error::SchemaError {
            context: format!("need at least 2 samples, got {samples}"),
        });
    }
    let mut out = String::new();
    out.push_str("t,body");
    for c in 0..lp.d() {
        write!(out, ",x{}", c + 1).unwrap();
    }
    out.push('\n');
    for i in 0..lp.n() {
        for q in 0..samples {
            let t = q as f64 * lp.period() / samples as f64;
            let x = lp.position(t);
            write!(out, "{t:.9},{}", i + 1).unwrap();
            for c in 0..lp.d() {
                write!(out, ",{:.9}", x[(i, c)]).unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// SVG with one closed polyline per body, equal-aspect viewBox padded 5%.
/// Three-dimensional orbits are projected orthographically onto `plane`.
pub fn export_svg(lp: &TrigLoop, samples: usize, plane: ProjectionPlane) -> Result<String> {
    if samples < 2 {
        return Err(Error::SchemaError {
            context: format!("need at least 2 samples, got {samples}"),
        });
    }
    let (ax, ay) = if lp.d() == 2 { (0, 1) } else { plane.axes() };

    // Sample every body, closing each curve at t = T.
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(samples + 1); lp.n()];
    for q in 0..=samples {
        let t = q as f64 * lp.period() / samples as f64;
        let x = lp.position(t);
        for (i, curve) in curves.iter_mut().enumerate() {
            // SVG y grows downward.
            curve.push((x[(i, ax)], -x[(i, ay)]));
        }
    }

    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for curve in &curves {
        for &(x, y) in curve {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let pad = 0.05 * span_x.max(span_y);
    let width = span_x + 2.0 * pad;
    let height = span_y + 2.0 * pad;
    let stroke = 0.004 * width.max(height);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="{:.0}" viewBox="{} {} {} {}">"#,
        640.0 * height / width,
        fmt_coord(min_x - pad),
        fmt_coord(min_y - pad),
        fmt_coord(width),
        fmt_coord(height)
    )
    .unwrap();
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_coord(x), fmt_coord(y)))
            .collect();
        writeln!(
            out,
            r#"  <polyline fill="none" stroke="{color}" stroke-width="{}" points="{}"/>"#,
            fmt_coord(stroke),
            points.join(" ")
        )
        .unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_loop() -> TrigLoop {
        let mut lp = TrigLoop::zeros(2, 2, 2, 2.0 * std::f64::consts::PI);
        lp.set_coeff(1, 0, 0, 1.0);
        lp.set_coeff(2, 0, 1, 1.0);
        lp.set_coeff(1, 1, 0, -1.0);
        lp.set_coeff(2, 1, 1, -1.0);
        lp
    }

    #[test]
    fn csv_row_count_is_samples_times_bodies_plus_header() {
        let lp = circle_loop();
        let csv = export_csv(&lp, 4).unwrap();
        assert_eq!(csv.lines().count(), 4 * 2 + 1);
        assert!(csv.starts_with("t,body,x1,x2\n"));
    }

    #[test]
    fn svg_polylines_close_on_periodic_orbits() {
        let lp = circle_loop();
        let svg = export_svg(&lp, 64, ProjectionPlane::Xy).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        for line in svg.lines().filter(|l| l.contains("points=")) {
            let points = line.split("points=\"").nth(1).unwrap();
            let points = points.split('"').next().unwrap();
            let first = points.split(' ').next().unwrap();
            let last = points.split(' ').next_back().unwrap();
            let parse = |s: &str| -> (f64, f64) {
                let mut it = s.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            };
            let (x0, y0) = parse(first);
            let (x1, y1) = parse(last);
            assert!(((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt() < 1e-6);
        }
    }
}
