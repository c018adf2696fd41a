//! SVG rendering of a layout: one `<line>` per edge, one `<circle>` per vertex.

use std::io::{self, Write};

use crate::error::{LayoutError, Result};
use crate::graph::Graph;
use crate::layout::Layout;

#[derive(Clone, Debug, PartialEq)]
pub struct SvgStyle {
    /// Defaults to 0.3% of the layout's bounding-box diagonal.
    pub vertex_radius: Option<f64>,
    /// Defaults to half the vertex radius.
    pub edge_width: Option<f64>,
    pub vertex_fill: String,
    pub edge_stroke: String,
    /// Rendered width in pixels; height follows the aspect ratio.
    pub pixel_width: u32,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            vertex_radius: None,
            edge_width: None,
            vertex_fill: "#1f77b4".into(),
            edge_stroke: "#7f7f7f".into(),
            pixel_width: 1024,
        }
    }
}

fn escape_attr(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('"', "&quot;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_svg<W: Write>(layout: &Layout, graph: &Graph, style: &SvgStyle, mut out: W) -> Result<()> {
    if layout.len() != graph.vertex_count() {
        return Err(LayoutError::InvalidParameter(format!(
            "layout has {} positions for {} vertices",
            layout.len(),
            graph.vertex_count()
        )));
    }
    if let Some(v) = layout.first_non_finite() {
        return Err(LayoutError::InvalidParameter(format!(
            "vertex {v} has a non-finite position"
        )));
    }
    let b = layout.bounds();
    let (min_x, min_y, w, h) = if b.is_empty() {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        (b.min.x, b.min.y, b.width(), b.height())
    };
    let span = if w.max(h) > 0.0 { w.max(h) } else { 1.0 };
    let margin = 0.05 * span;
    let (vb_w, vb_h) = (w + 2.0 * margin, h + 2.0 * margin);
    let diagonal = (w * w + h * h).sqrt();
    let radius = style
        .vertex_radius
        .unwrap_or(0.003 * if diagonal > 0.0 { diagonal } else { span });
    let edge_width = style.edge_width.unwrap_or(radius / 2.0);
    let px_w = style.pixel_width.max(1);
    let px_h = ((px_w as f64) * vb_h / vb_w).round().max(1.0) as u64;

    write_body(
        &mut out,
        layout,
        graph,
        style,
        [min_x - margin, min_y - margin, vb_w, vb_h],
        (px_w, px_h),
        radius,
        edge_width,
    )
    .map_err(LayoutError::from)
}

#[allow(clippy::too_many_arguments)]
fn write_body<W: Write>(
    out: &mut W,
    layout: &Layout,
    graph: &Graph,
    style: &SvgStyle,
    view_box: [f64; 4],
    pixels: (u32, u64),
    radius: f64,
    edge_width: f64,
) -> io::Result<()> {
    let [x, y, w, h] = view_box;
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="{x:?} {y:?} {w:?} {h:?}">"#,
        pixels.0, pixels.1
    )?;
    writeln!(
        out,
        r#"<g stroke="{}" stroke-width="{edge_width:?}" stroke-opacity="0.6">"#,
        escape_attr(&style.edge_stroke)
    )?;
    let p = &layout.positions;
    for &(u, v) in graph.edges() {
        let (a, b) = (p[u as usize], p[v as usize]);
        writeln!(
            out,
            r#"<line x1="{:?}" y1="{:?}" x2="{:?}" y2="{:?}"/>"#,
            a.x, a.y, b.x, b.y
        )?;
    }
    writeln!(out, "</g>")?;
    writeln!(out, r#"<g fill="{}">"#, escape_attr(&style.vertex_fill))?;
    for q in p {
        writeln!(out, r#"<circle cx="{:?}" cy="{:?}" r="{radius:?}"/>"#, q.x, q.y)?;
    }
    writeln!(out, "</g>")?;
    writeln!(out, "</svg>")?;
    Ok(())
}

pub fn svg_string(layout: &Layout, graph: &Graph, style: &SvgStyle) -> Result<String> {
    let mut buf = Vec::new();
    write_svg(layout, graph, style, &mut buf)?;
    Ok(String::from_utf8(buf).expect("svg output is utf-8"))
}
