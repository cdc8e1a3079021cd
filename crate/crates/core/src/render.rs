//! Visual artifacts: SVG weight graphs, PNG image panels and SVG error
//! curves.
//!
//! Everything here is a pure function of its inputs; the SVG writers use
//! fixed-precision number formatting so equal inputs give equal bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridPosition, PolarGeometry, TopologyKind};
use crate::imaging::{from_polar, upscale_nearest, GrayImage, Picture};
use crate::network::StructureGraph;
use crate::training::TrainReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderStyle {
    /// Edges with `|w|` below this are left out.
    pub weight_threshold: f64,
    pub positive_color: String,
    pub negative_color: String,
    /// Canvas pixels between neighbouring Cartesian nodes. Polar pictures
    /// use half this per source pixel.
    pub node_spacing: f64,
    pub node_radius: f64,
    pub stroke_width: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            weight_threshold: 0.2,
            positive_color: "blue".into(),
            negative_color: "red".into(),
            node_spacing: 24.0,
            node_radius: 1.5,
            stroke_width: 1.5,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_threshold >= 0.0) {
            return Err(Error::config(
                "render.weight_threshold",
                format!("must be non-negative, got {}", self.weight_threshold),
            ));
        }
        if !(self.node_spacing > 0.0) {
            return Err(Error::config("render.node_spacing", "must be positive"));
        }
        Ok(())
    }

    pub fn keeps(&self, weight: f64) -> bool {
        weight.abs() >= self.weight_threshold
    }
}

/// Stroke opacity of an edge: `w²`, capped at 1.
pub fn edge_opacity(weight: f64) -> f64 {
    (weight * weight).min(1.0)
}

struct Layout {
    width: f64,
    height: f64,
    place: Box<dyn Fn(GridPosition) -> (f64, f64)>,
}

fn layout(g: &StructureGraph, style: &RenderStyle) -> Result<Layout> {
    let s = style.node_spacing;
    match (g.kind, &g.polar) {
        (TopologyKind::Cartesian, _) => Ok(Layout {
            width: g.width as f64 * s,
            height: g.height as f64 * s,
            place: Box::new(move |p| ((p.col as f64 + 0.5) * s, (p.row as f64 + 0.5) * s)),
        }),
        (TopologyKind::Polar, Some(geom)) => {
            let unit = s / 2.0;
            let side = geom.source_size as f64 * unit;
            let c = side / 2.0;
            let geom: PolarGeometry = geom.clone();
            Ok(Layout {
                width: side,
                height: side,
                place: Box::new(move |p| {
                    let (x, y) = geom.sector_centroid(p.row, p.col);
                    (c + x * unit, c - y * unit)
                }),
            })
        }
        (TopologyKind::Polar, None) => Err(Error::invalid("polar structure without geometry")),
    }
}

/// Draws each kept edge as a line from source to target node, blue for
/// positive and red for negative weights, with opacity `min(1, w²)`.
/// Self-connections become rings around their node.
pub fn render_structure(g: &StructureGraph, style: &RenderStyle) -> Result<String> {
    style.validate()?;
    let lay = layout(g, style)?;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#,
        w = lay.width,
        h = lay.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g id="edges" fill="none" stroke-width="{:.2}" stroke-linecap="round">"#,
        style.stroke_width
    );
    for e in g.edges.iter().filter(|e| style.keeps(e.weight)) {
        let color = if e.weight >= 0.0 {
            &style.positive_color
        } else {
            &style.negative_color
        };
        let (x1, y1) = (lay.place)(e.source);
        let (x2, y2) = (lay.place)(e.target);
        let opacity = edge_opacity(e.weight);
        if e.source == e.target {
            let _ = writeln!(
                svg,
                r#"<circle cx="{x1:.2}" cy="{y1:.2}" r="{:.2}" stroke="{color}" stroke-opacity="{opacity:.4}"/>"#,
                style.node_spacing * 0.25
            );
        } else {
            let _ = writeln!(
                svg,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-opacity="{opacity:.4}"/>"#
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r##"<g id="nodes" fill="#333333">"##);
    for n in &g.nodes {
        let (x, y) = (lay.place)(n.position);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}"/>"#,
            style.node_radius
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelStyle {
    /// Magnification of Cartesian tiles.
    pub scale: usize,
    /// Side of polar tiles in pixels.
    pub polar_size: usize,
    /// Blank columns between tiles.
    pub gap: usize,
}

impl Default for PanelStyle {
    fn default() -> Self {
        Self {
            scale: 10,
            polar_size: 160,
            gap: 4,
        }
    }
}

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;
/// Horizontal advance per character.
const GLYPH: usize = GLYPH_W + 1;
const LABEL_PAD: usize = 2;

/// 5×7 bitmaps, one byte per row, most significant of the low five bits on
/// the left. Lowercase letters use the uppercase shapes.
const GLYPHS: &[(char, [u8; GLYPH_H])] = &[
    ('0', [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e]),
    ('1', [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e]),
    ('2', [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f]),
    ('3', [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e]),
    ('4', [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02]),
    ('5', [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e]),
    ('6', [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e]),
    ('7', [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08]),
    ('8', [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e]),
    ('9', [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c]),
    ('A', [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11]),
    ('B', [0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e]),
    ('C', [0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e]),
    ('D', [0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c]),
    ('E', [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f]),
    ('F', [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10]),
    ('G', [0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f]),
    ('H', [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11]),
    ('I', [0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e]),
    ('J', [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c]),
    ('K', [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11]),
    ('L', [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f]),
    ('M', [0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11]),
    ('N', [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11]),
    ('O', [0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e]),
    ('P', [0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10]),
    ('Q', [0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d]),
    ('R', [0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11]),
    ('S', [0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e]),
    ('T', [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04]),
    ('U', [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e]),
    ('V', [0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04]),
    ('W', [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a]),
    ('X', [0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11]),
    ('Y', [0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04]),
    ('Z', [0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f]),
    (' ', [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00]),
    ('.', [0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c]),
    (',', [0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08]),
    ('-', [0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00]),
    ('_', [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f]),
    (':', [0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00]),
    ('(', [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02]),
    (')', [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08]),
    ('=', [0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00]),
    ('/', [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00]),
    ('?', [0x0e, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04]),
];

fn glyph(ch: char) -> [u8; GLYPH_H] {
    let ch = ch.to_ascii_uppercase();
    let find = |want: char| GLYPHS.iter().find(|(c, _)| *c == want).map(|(_, g)| *g);
    find(ch).or_else(|| find('?')).unwrap_or([0; GLYPH_H])
}

fn draw_text(canvas: &mut [f64], width: usize, x0: usize, y0: usize, text: &str) {
    for (k, ch) in text.chars().enumerate() {
        for (dy, row) in glyph(ch).iter().enumerate() {
            for dx in 0..GLYPH_W {
                if row >> (GLYPH_W - 1 - dx) & 1 == 1 {
                    let x = x0 + k * GLYPH + dx;
                    if x < width {
                        canvas[(y0 + dy) * width + x] = 0.0;
                    }
                }
            }
        }
    }
}

/// Places the pictures left to right on a white canvas, Cartesian tiles
/// magnified by nearest neighbour and polar tiles painted as annuli.
/// A label band is added above the tiles unless every label is empty.
pub fn render_panel(pictures: &[Picture], labels: &[&str], style: &PanelStyle) -> Result<GrayImage> {
    if pictures.is_empty() {
        return Err(Error::invalid("a panel needs at least one picture"));
    }
    if !labels.is_empty() && labels.len() != pictures.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} pictures",
            labels.len(),
            pictures.len()
        )));
    }
    let tiles = pictures
        .iter()
        .map(|p| match p {
            Picture::Gray(img) => upscale_nearest(img, style.scale),
            Picture::Polar(p) => from_polar(p, style.polar_size.max(p.geometry().source_size)),
        })
        .collect::<Result<Vec<_>>>()?;
    let band = if labels.iter().any(|l| !l.is_empty()) {
        GLYPH_H + 2 * LABEL_PAD
    } else {
        0
    };
    let width = tiles.iter().map(|t| t.width()).sum::<usize>() + style.gap * (tiles.len() - 1);
    let height = band + tiles.iter().map(|t| t.height()).max().unwrap_or(0);
    let mut canvas = vec![1.0; width * height];
    let mut x0 = 0;
    for (k, tile) in tiles.iter().enumerate() {
        for y in 0..tile.height() {
            let row = &mut canvas[(band + y) * width + x0..][..tile.width()];
            row.copy_from_slice(&tile.pixels()[y * tile.width()..][..tile.width()]);
        }
        if let Some(label) = labels.get(k).filter(|l| !l.is_empty()) {
            let max_chars = tile.width() / GLYPH;
            let text: String = label.chars().take(max_chars).collect();
            draw_text(&mut canvas, width, x0, LABEL_PAD, &text);
        }
        x0 += tile.width() + style.gap;
    }
    GrayImage::new(width, height, canvas)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Wide CSV aligned on the 1-based batch index: for every label a training
/// error column and a 1X test error column. Runs shorter than the longest
/// leave their cells empty.
pub fn curves_csv(reports: &[TrainReport], labels: &[&str]) -> Result<String> {
    check_curves(reports, labels)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Data(format!("writing curves: {e}"));
    let mut header = vec!["batch".to_string()];
    for l in labels {
        header.push(format!("{l}_train_error"));
        header.push(format!("{l}_test_error_1x"));
    }
    w.write_record(&header).map_err(err)?;
    let rows = reports.iter().map(|r| r.batch_test_error.len()).max().unwrap_or(0);
    for i in 0..rows {
        let mut rec = vec![(i + 1).to_string()];
        for r in reports {
            for series in [&r.batch_train_error, &r.batch_test_error] {
                rec.push(series.get(i).map(|v| v.to_string()).unwrap_or_default());
            }
        }
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("writing curves: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

fn check_curves(reports: &[TrainReport], labels: &[&str]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to plot"));
    }
    if labels.len() != reports.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} reports",
            labels.len(),
            reports.len()
        )));
    }
    Ok(())
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line plot of 1X test error against batch index, one polyline per report.
pub fn curves_svg(reports: &[TrainReport], labels: &[&str]) -> Result<String> {
    check_curves(reports, labels)?;
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (56.0, 140.0, 20.0, 40.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let batches = reports.iter().map(|r| r.batch_test_error.len()).max().unwrap_or(0).max(1);
    let peak = reports
        .iter()
        .flat_map(|r| r.batch_test_error.iter().copied())
        .fold(0.0f64, f64::max);
    let y_max = ((peak / 0.05).ceil() * 0.05).max(0.05);
    let px = |i: usize| {
        if batches == 1 {
            left
        } else {
            left + pw * i as f64 / (batches - 1) as f64
        }
    };
    let py = |v: f64| top + ph * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r##"<g id="axes" stroke="#000000" fill="none">"##);
    let _ = writeln!(
        svg,
        r#"<polyline points="{left:.2},{top:.2} {left:.2},{b:.2} {r:.2},{b:.2}"/>"#,
        b = top + ph,
        r = left + pw
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="ticks" fill="black">"#);
    for k in 0..=5 {
        let v = y_max * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            left - 6.0,
            py(v) + 4.0
        );
    }
    for (i, anchor) in [(0, "start"), (batches - 1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            px(i),
            top + ph + 16.0,
            i + 1
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">batch</text>"#,
        left + pw / 2.0,
        h - 8.0
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="series" fill="none" stroke-width="1.5">"#);
    for (k, (r, label)) in reports.iter().zip(labels).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = r
            .batch_test_error
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" stroke="{color}" points="{}"/>"#,
            escape(label),
            points.join(" ")
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="legend">"#);
    for (k, label) in labels.iter().enumerate() {
        let y = top + 14.0 * k as f64 + 6.0;
        let x = left + pw + 12.0;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 20.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

/// Writes `<stem>.csv` and `<stem>.svg` into `dir`.
pub fn emit_curves(dir: &Path, stem: &str, reports: &[TrainReport], labels: &[&str]) -> Result<()> {
    let csv = curves_csv(reports, labels)?;
    let svg = curves_svg(reports, labels)?;
    for (ext, text) in [("csv", csv), ("svg", svg)] {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
