//! SVG 1.1 scenes for planar soups, retained fractal cells and estimate
//! curves.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fractal::RetainedSet;
use crate::geometry::{AxisBox, Point, ShapeKind};
use crate::lattice::Adjacency;
use crate::raster::{complement_components, Grid};
use crate::soup::ShapeSet;
use crate::stats::Estimate;

const SIZE: f64 = 600.0;

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
}

/// Distinct fill for component `i`, stepping hue by the golden angle.
fn palette(i: usize) -> String {
    let hue = (i as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},65%,70%)")
}

/// Maps window coordinates to pixels with the y axis pointing up.
struct Frame {
    lo: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(window: &AxisBox<f64>) -> Self {
        let scale = SIZE / window.side(0).max(window.side(1));
        Self { lo: [window.lo()[0], window.lo()[1]], scale, height: window.side(1) * scale }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.lo[0]) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        self.height - (y - self.lo[1]) * self.scale
    }
}

/// Shapes over the complement cells of `grid`, one fill per component.
pub fn soup_svg(set: &ShapeSet, grid: Option<&Grid>) -> Result<String> {
    if set.dim() != 2 {
        return Err(Error::DimensionNot2(set.dim()));
    }
    let window = grid.map_or(&set.spec.window, |g| g.window());
    let f = Frame::new(window);
    let mut out = String::new();
    header(&mut out, f.x(window.hi()[0]), f.height);
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    if let Some(g) = grid {
        let labels = complement_components(g, Adjacency::Face);
        let h = g.h();
        let _ = writeln!(out, r#"<g stroke="none">"#);
        for (i, &l) in labels.labels.iter().enumerate() {
            if l < 0 {
                continue;
            }
            let c = g.lattice().coords(i);
            let (x0, y1) = (g.origin()[0] + c[0] as f64 * h, g.origin()[1] + (c[1] + 1) as f64 * h);
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                f.x(x0),
                f.y(y1),
                h * f.scale,
                h * f.scale,
                palette(l as usize)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, r##"<g fill="#30343c" fill-opacity="0.55" stroke="#101218" stroke-width="0.5">"##);
    for s in &set.shapes {
        let (cx, cy) = (s.center[0], s.center[1]);
        match set.kind {
            ShapeKind::Ball => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#,
                    f.x(cx),
                    f.y(cy),
                    s.scale * f.scale
                );
            }
            ShapeKind::AxisCube => {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
                    f.x(cx - s.scale),
                    f.y(cy + s.scale),
                    2.0 * s.scale * f.scale,
                    2.0 * s.scale * f.scale
                );
            }
        }
    }
    let _ = writeln!(out, "</g>\n</svg>");
    Ok(out)
}

/// Retained cells of `level` on the tiled block.
pub fn fractal_svg(set: &RetainedSet, level: usize) -> Result<String> {
    if set.dim() != 2 {
        return Err(Error::DimensionNot2(set.dim()));
    }
    if level == 0 || level > set.depth() {
        return Err(Error::InvalidFractalSpec(format!("level {level} outside 1..={}", set.depth())));
    }
    let tiles = set.tiles();
    let window = AxisBox::new(Point::new(vec![0.0, 0.0]), Point::new(vec![tiles[0] as f64, tiles[1] as f64]))?;
    let f = Frame::new(&window);
    let side = 1.0 / (set.n() as f64).powi(level as i32);
    let lat = set.lattice(level);
    let mut out = String::new();
    header(&mut out, f.x(tiles[0] as f64), f.height);
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(out, r##"<g fill="#1f3b73" stroke="none">"##);
    for i in set.level(level).iter_ones() {
        let c = lat.coords(i);
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
            f.x(c[0] as f64 * side),
            f.y((c[1] + 1) as f64 * side),
            side * f.scale,
            side * f.scale
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    Ok(out)
}

/// One labelled curve of estimates against a parameter.
pub struct Curve<'a> {
    pub label: String,
    pub points: &'a [(f64, Estimate)],
}

/// Estimate curves with CI bands on a `[x_min, x_max] × [0, 1]` frame.
pub fn curves_svg(curves: &[Curve<'_>], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (720.0, 480.0, 60.0);
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !(x0 < x1) {
        x0 = if x0.is_finite() { x0 - 0.5 } else { 0.0 };
        x1 = x0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - y * (h - 2.0 * m);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r##"<g stroke="#000000" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{b}" x2="{m}" y2="{m}"/></g>"##,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="12">"#);
    for k in 0..=4 {
        let y = k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, m - 6.0, py(y) + 4.0);
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.3}</text>"#, px(x), h - m + 18.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, "</g>");
    for (i, c) in curves.iter().enumerate() {
        let color = format!("hsl({:.1},70%,40%)", (i as f64 * 137.507_764) % 360.0);
        if c.points.is_empty() {
            continue;
        }
        let mut band: Vec<String> = c.points.iter().map(|(x, e)| format!("{:.2},{:.2}", px(*x), py(e.ci_hi))).collect();
        band.extend(c.points.iter().rev().map(|(x, e)| format!("{:.2},{:.2}", px(*x), py(e.ci_lo))));
        let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = c.points.iter().map(|(x, e)| format!("{:.2},{:.2}", px(*x), py(e.p_hat))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            w - m - 110.0,
            m + 16.0 * (i as f64 + 1.0),
            escape(&c.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{sample_fractal, FractalSpec};
    use crate::raster::rasterize;
    use crate::rng::Stream;
    use crate::soup::{sample_soup, SoupSpec};

    #[test]
    fn soup_scene_has_one_element_per_shape() {
        let spec = SoupSpec::balls(AxisBox::unit(2), 2.0, 0.1, 0.4, 0);
        let set = sample_soup(&spec, &Stream::new(3)).unwrap();
        let grid = rasterize(&set, &spec.window, 0.02).unwrap();
        let svg = soup_svg(&set, Some(&grid)).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), set.len());
        let uncovered = grid.lattice().len() - grid.covered_count();
        // one cell rect per uncovered cell plus the background
        assert_eq!(svg.matches("<rect").count(), uncovered + 1);
    }

    #[test]
    fn fractal_scene_counts_cells() {
        let set = sample_fractal(&FractalSpec::new(3, 2, 0.7, 2, 0), &Stream::new(1)).unwrap();
        let svg = fractal_svg(&set, 2).unwrap();
        assert_eq!(svg.matches("<rect").count(), set.retained_count(2) + 1);
        assert!(fractal_svg(&set, 3).is_err());
    }

    #[test]
    fn curves_render() {
        let pts = vec![(0.5, Estimate::from_counts(9, 10, 0.95, 0)), (1.0, Estimate::from_counts(2, 10, 0.95, 0))];
        let svg = curves_svg(&[Curve { label: "ε = 0.05".into(), points: &pts }], "λ", "Φ");
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("ε = 0.05"));
    }

    #[test]
    fn palette_is_distinct_for_neighbors() {
        assert_ne!(palette(0), palette(1));
    }
}
