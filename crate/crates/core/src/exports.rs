//! CSV and SVG emission with an embedded run manifest.
//!
//! Both writers are hand-rolled: the CSV dialect is the quoted-comma one and
//! the SVG is a flat list of polylines, so no tabular or plotting dependency
//! is worth its weight here. Every artifact carries the manifest of the run
//! that produced it — as a `# manifest:` comment line in CSV and as a
//! `<metadata>` element in SVG — and [`extract_manifest`] recovers it from
//! either, so reproduction does not depend on shell history.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;

/// Renders a CSV document: manifest comment, header, then rows.
///
/// Fields containing commas, quotes, or newlines are quoted with doubled
/// inner quotes. Row arity must match the header.
pub fn csv_document(manifest_json: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut out = String::new();
    out.push_str("# manifest: ");
    out.push_str(&manifest_json.replace(['\n', '\r'], " "));
    out.push('\n');
    out.push_str(&csv_line(columns.iter().map(|c| c.to_string()).collect::<Vec<_>>().as_slice()));
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} fields, header has {}",
                row.len(),
                columns.len()
            )));
        }
        out.push_str(&csv_line(row));
    }
    Ok(out)
}

fn csv_line(fields: &[String]) -> String {
    let mut line = String::new();
    for (i, field) in fields.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        if field.contains(',') || field.contains('"') || field.contains('\n') {
            line.push('"');
            line.push_str(&field.replace('"', "\"\""));
            line.push('"');
        } else {
            line.push_str(field);
        }
    }
    line.push('\n');
    line
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// Recovers the embedded manifest from a CSV or SVG document produced here.
pub fn extract_manifest(content: &str) -> Option<String> {
    if let Some(line) = content.lines().find(|l| l.starts_with("# manifest: ")) {
        return Some(line.trim_start_matches("# manifest: ").to_string());
    }
    let start = content.find("<metadata id=\"run-manifest\">")?;
    let rest = &content[start + "<metadata id=\"run-manifest\">".len()..];
    let end = rest.find("</metadata>")?;
    Some(xml_unescape(&rest[..end]))
}

/// Plane figure of a trajectory: the table body `K`, an optional scaled
/// overlay of the length-measuring body `T`, the bounce polygon (closed for
/// a periodic orbit, open for a forward trace), and its vertices. Only
/// two-dimensional bodies can be drawn.
pub fn trajectory_svg(
    k: &ConvexBody,
    t: Option<&ConvexBody>,
    points: &[DVector<f64>],
    closed: bool,
    manifest_json: &str,
) -> Result<String> {
    if k.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "figures need a plane body, got dimension {}",
            k.dim()
        )));
    }
    for p in points {
        if p.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: p.len() });
        }
    }

    let supports = k.axis_supports()?;
    let extent = supports.iter().cloned().fold(1e-12, f64::max) * 1.15;
    let stroke = extent / 120.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\">\n",
        -extent,
        -extent,
        2.0 * extent,
        2.0 * extent
    ));
    svg.push_str("<metadata id=\"run-manifest\">");
    svg.push_str(&xml_escape(manifest_json));
    svg.push_str("</metadata>\n");

    svg.push_str(&boundary_path(k, 1.0, "#1f4e79", stroke, None)?);
    if let Some(t_body) = t {
        if t_body.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: t_body.dim() });
        }
        // Scale the overlay to a fixed fraction of the table's extent so the
        // shapes are comparable regardless of the bodies' native sizes.
        let t_extent = t_body.axis_supports()?.iter().cloned().fold(1e-12, f64::max);
        let factor = 0.35 * extent / t_extent.max(1e-12);
        svg.push_str(&boundary_path(t_body, factor, "#999999", stroke * 0.8, Some("4,3"))?);
    }

    if points.len() >= 2 {
        let shape = if closed { "polygon" } else { "polyline" };
        let mut attr = format!("<{shape} fill=\"none\" stroke=\"#c0392b\" points=\"");
        for p in points {
            attr.push_str(&format!("{:.6},{:.6} ", p[0], -p[1]));
        }
        attr.push_str(&format!("\" stroke-width=\"{stroke:.6}\"/>\n"));
        svg.push_str(&attr);
        for p in points {
            svg.push_str(&format!(
                "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"{:.6}\" fill=\"#c0392b\"/>\n",
                p[0],
                -p[1],
                stroke * 1.8
            ));
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Closed polyline tracing `scale · ∂K` (256 samples), SVG y-axis flipped.
fn boundary_path(
    k: &ConvexBody,
    scale: f64,
    color: &str,
    stroke: f64,
    dash: Option<&str>,
) -> Result<String> {
    const SAMPLES: usize = 256;
    let mut path = String::from("<path fill=\"none\" d=\"");
    for i in 0..SAMPLES {
        let angle = 2.0 * std::f64::consts::PI * i as f64 / SAMPLES as f64;
        let u = DVector::from_column_slice(&[angle.cos(), angle.sin()]);
        let b = k.boundary_point(&u)? * scale;
        path.push_str(if i == 0 { "M" } else { "L" });
        path.push_str(&format!("{:.6} {:.6} ", b[0], -b[1]));
    }
    path.push_str(&format!("Z\" stroke=\"{color}\" stroke-width=\"{stroke:.6}\""));
    if let Some(d) = dash {
        path.push_str(&format!(" stroke-dasharray=\"{d}\""));
    }
    path.push_str("/>\n");
    Ok(path)
}
