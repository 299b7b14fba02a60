//! CSV and SVG renderings of fields, contours and layouts.
//!
//! CSV numbers use six decimals. SVG coordinates are pixel centers, one
//! user unit per pixel.

use std::fmt::Write;

use crate::chamfer::GradientField;
use crate::dtransform::DistanceField;
use crate::optimizer::DeformationField;
use crate::pu_model::Patch;
use crate::raster::{EdgeMap, Grid, Vec2};

/// Distance values, one CSV row per image row.
pub fn distance_csv(field: &DistanceField) -> String {
    let (w, h) = field.dims();
    let mut out = String::with_capacity(w * h * 10);
    for y in 0..h {
        for x in 0..w {
            if x > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.6}", field.at(x, y));
        }
        out.push('\n');
    }
    out
}

pub fn field_csv(field: &DeformationField) -> String {
    let (w, h) = field.dims();
    let mut out = String::from("x,y,ux,uy,covered\n");
    for y in 0..h {
        for x in 0..w {
            let u = field.at(x, y);
            let _ = writeln!(out, "{x},{y},{:.6},{:.6},{}", u.x, u.y, u8::from(field.is_covered(x, y)));
        }
    }
    out
}

/// Dense vector field with a caller-chosen header for the two components.
pub fn vector_csv(grid: &Grid<Vec2>, header: &str) -> String {
    let (w, h) = grid.dims();
    let mut out = format!("{header}\n");
    for y in 0..h {
        for x in 0..w {
            let v = grid.get(x, y);
            let _ = writeln!(out, "{x},{y},{:.6},{:.6}", v.x, v.y);
        }
    }
    out
}

pub fn gradient_csv(field: &GradientField) -> String {
    vector_csv(field.grid(), "x,y,jx,jy")
}

fn svg_open(w: usize, h: usize) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"-0.5 -0.5 {w} {h}\">\n\
         <rect x=\"-0.5\" y=\"-0.5\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
        w * 4,
        h * 4
    )
}

fn svg_pixels(out: &mut String, edges: &EdgeMap, color: &str, opacity: f64) {
    let _ = writeln!(out, "<g fill=\"{color}\" fill-opacity=\"{opacity}\">");
    for (x, y) in edges.contour_pixels() {
        let _ = writeln!(out, "<rect x=\"{}\" y=\"{}\" width=\"1\" height=\"1\"/>", x as f64 - 0.5, y as f64 - 0.5);
    }
    out.push_str("</g>\n");
}

/// Source in red, target in blue, deformed source in green.
pub fn overlay_svg(source: &EdgeMap, target: &EdgeMap, deformed: &EdgeMap) -> String {
    let (w, h) = target.dims();
    let mut out = svg_open(w, h);
    svg_pixels(&mut out, source, "red", 0.6);
    svg_pixels(&mut out, target, "blue", 0.6);
    svg_pixels(&mut out, deformed, "green", 0.6);
    out.push_str("</svg>\n");
    out
}

/// A regular grid of lines every `spacing` pixels, each point moved to
/// `x + u(x)`.
pub fn grid_svg(field: &DeformationField, spacing: usize) -> String {
    let (w, h) = field.dims();
    let spacing = spacing.max(1);
    let mut out = svg_open(w, h);
    out.push_str("<g fill=\"none\" stroke=\"black\" stroke-width=\"0.3\">\n");
    let mut line = |pts: &mut dyn Iterator<Item = (usize, usize)>| {
        out.push_str("<polyline points=\"");
        for (i, (x, y)) in pts.enumerate() {
            let p = Vec2::new(x as f64, y as f64) + field.at(x, y);
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.3},{:.3}", p.x, p.y);
        }
        out.push_str("\"/>\n");
    };
    for y in (0..h).step_by(spacing) {
        line(&mut (0..w).map(|x| (x, y)));
    }
    for x in (0..w).step_by(spacing) {
        line(&mut (0..h).map(|y| (x, y)));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Patch supports as circles over a contour.
pub fn patches_svg(edges: &EdgeMap, patches: &[Patch]) -> String {
    let (w, h) = edges.dims();
    let mut out = svg_open(w, h);
    svg_pixels(&mut out, edges, "black", 1.0);
    out.push_str("<g fill=\"none\" stroke=\"orange\" stroke-width=\"0.3\">\n");
    for p in patches {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\"/>",
            p.center.x,
            p.center.y,
            p.support_radius()
        );
    }
    out.push_str("</g>\n<g fill=\"orange\">\n");
    for p in patches {
        let _ = writeln!(out, "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"0.6\"/>", p.center.x, p.center.y);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Arrows for every nonzero vector, scaled so the longest is `max_len`
/// pixels.
pub fn quiver_svg(field: &GradientField, max_len: f64) -> String {
    let (w, h) = field.dims();
    let top = field.max_norm();
    let scale = if top > 0.0 { max_len / top } else { 0.0 };
    let mut out = svg_open(w, h);
    out.push_str("<g stroke=\"purple\" stroke-width=\"0.25\">\n");
    for px in field.support() {
        let (x, y) = ((px % w) as f64, (px / w) as f64);
        let v = field.grid().data()[px] * scale;
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{:.3}\" y2=\"{:.3}\"/>",
            x + v.x,
            y + v.y
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}
