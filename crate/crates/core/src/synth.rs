//! Synthetic stand-ins for image corpora and video frames.
//!
//! `drawing` produces flat-shaded outlined shapes on a light background,
//! `photo` produces smooth multi-scale texture with soft blobs. Both are
//! deterministic in their generator. The writers emit numbered PNGs that
//! the directory source kinds and frame ingestion read back.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::datagen::sample_rng;
use crate::error::{Error, Result};
use crate::imaging::{apply_transform, resize_bilinear, GrayImage, TransformSpec};

/// Side of a generated drawing.
pub const DRAWING_SIZE: usize = 256;
/// Width and height of a generated photo.
pub const PHOTO_DIMS: (usize, usize) = (320, 240);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Drawings,
    Photos,
}

enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        angle: f64,
    },
    Polygon(Vec<(f64, f64)>),
}

impl Shape {
    /// Signed distance-like value: negative inside, roughly in pixels.
    fn depth(&self, x: f64, y: f64) -> f64 {
        match self {
            Shape::Ellipse { cx, cy, rx, ry, angle } => {
                let (s, c) = angle.sin_cos();
                let (u, v) = (x - cx, y - cy);
                let (u, v) = (c * u + s * v, -s * u + c * v);
                let r = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
                (r - 1.0) * rx.min(*ry)
            }
            Shape::Polygon(pts) => {
                // convex, counter-clockwise: max over edges of outward distance
                let n = pts.len();
                (0..n)
                    .map(|i| {
                        let (x0, y0) = pts[i];
                        let (x1, y1) = pts[(i + 1) % n];
                        let (ex, ey) = (x1 - x0, y1 - y0);
                        let len = (ex * ex + ey * ey).sqrt().max(1e-9);
                        ((x - x0) * ey - (y - y0) * ex) / len
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

fn random_polygon(rng: &mut impl Rng, cx: f64, cy: f64, radius: f64) -> Shape {
    let sides = rng.gen_range(3..=6);
    let start = rng.gen_range(0.0..TAU);
    let pts = (0..sides)
        .map(|k| {
            let a = start + TAU * k as f64 / sides as f64;
            (cx + radius * a.cos(), cy + radius * a.sin())
        })
        .collect::<Vec<_>>();
    // image y grows downward, so reverse for a counter-clockwise outline
    let orient: f64 = (0..sides)
        .map(|i| {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % sides];
            x0 * y1 - x1 * y0
        })
        .sum();
    Shape::Polygon(if orient > 0.0 { pts.into_iter().rev().collect() } else { pts })
}

/// A cartoon-like figure: a large body with a few attached parts, each
/// filled flat and outlined in near-black.
pub fn drawing(rng: &mut impl Rng) -> GrayImage {
    let size = DRAWING_SIZE as f64;
    let centre = size / 2.0;
    let mut shapes = vec![Shape::Ellipse {
        cx: centre + rng.gen_range(-15.0..15.0),
        cy: centre + rng.gen_range(-10.0..20.0),
        rx: rng.gen_range(45.0..75.0),
        ry: rng.gen_range(45.0..80.0),
        angle: rng.gen_range(0.0..TAU),
    }];
    for _ in 0..rng.gen_range(2..=5) {
        let a = rng.gen_range(0.0..TAU);
        let d = rng.gen_range(40.0..80.0);
        let (cx, cy) = (centre + d * a.cos(), centre + d * a.sin());
        let r = rng.gen_range(15.0..40.0);
        shapes.push(if rng.gen_bool(0.5) {
            Shape::Ellipse {
                cx,
                cy,
                rx: r,
                ry: r * rng.gen_range(0.5..1.5),
                angle: rng.gen_range(0.0..TAU),
            }
        } else {
            random_polygon(rng, cx, cy, r)
        });
    }
    let fills: Vec<f64> = shapes.iter().map(|_| rng.gen_range(0.2..0.95)).collect();
    let background = rng.gen_range(0.9..1.0);
    let outline = 2.5;
    GrayImage::from_fn(DRAWING_SIZE, DRAWING_SIZE, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        // later shapes are drawn on top
        let mut value = background;
        for (shape, &fill) in shapes.iter().zip(&fills) {
            let d = shape.depth(px, py);
            if d < -outline {
                value = fill;
            } else if d < 0.0 {
                value = 0.05;
            }
        }
        value
    })
}

fn value_noise(rng: &mut impl Rng, w: usize, h: usize, cells: usize) -> Result<GrayImage> {
    let gw = cells.max(2);
    let gh = (cells * h / w).max(2);
    let grid = GrayImage::from_fn(gw, gh, |_, _| rng.gen::<f64>());
    resize_bilinear(&grid, w, h)
}

/// A photo-like scene: multi-octave smooth texture, a lighting gradient and
/// a few soft bright or dark blobs.
pub fn photo(rng: &mut impl Rng) -> Result<GrayImage> {
    let (w, h) = PHOTO_DIMS;
    let octaves = [(3, 0.5), (6, 0.25), (12, 0.15), (24, 0.1)];
    let layers = octaves
        .iter()
        .map(|&(cells, amp)| Ok((value_noise(rng, w, h, cells)?, amp)))
        .collect::<Result<Vec<_>>>()?;
    let (gx, gy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            (
                rng.gen_range(0.2..0.8) * w as f64,
                rng.gen_range(0.2..0.8) * h as f64,
                rng.gen_range(20.0..70.0),
                rng.gen_range(-0.4..0.4),
            )
        })
        .collect();
    let raw: Vec<f64> = (0..w * h)
        .map(|k| {
            let (x, y) = ((k % w) as f64, (k / w) as f64);
            let mut v: f64 = layers.iter().map(|(l, a)| a * l.pixels()[k]).sum();
            v += gx * (x / w as f64 - 0.5) + gy * (y / h as f64 - 0.5);
            for &(bx, by, s, amp) in &blobs {
                let d2 = (x - bx).powi(2) + (y - by).powi(2);
                v += amp * (-d2 / (2.0 * s * s)).exp();
            }
            v
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    GrayImage::new(w, h, raw.iter().map(|v| 0.05 + 0.9 * (v - lo) / span).collect())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `count` images named `0000.png`, `0001.png`, ... into `dir`.
pub fn write_corpus(dir: &Path, kind: CorpusKind, count: usize, seed: u64) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    (0..count)
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let img = match kind {
                CorpusKind::Drawings => drawing(&mut rng),
                CorpusKind::Photos => photo(&mut rng)?,
            };
            let path = dir.join(format!("{i:04}.png"));
            img.save_png(&path)?;
            Ok(path)
        })
        .collect()
}

/// Writes `count` frames of one drawing turning counter-clockwise by
/// `degrees_per_frame`, with a little per-frame jitter and sensor noise.
pub fn write_frames(dir: &Path, count: usize, degrees_per_frame: f64, seed: u64) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut rng = sample_rng(seed, 0);
    let base = drawing(&mut rng);
    (0..count)
        .map(|k| {
            let jitter = rng.gen_range(-0.5..0.5);
            let t = TransformSpec::rotate(degrees_per_frame * k as f64 + jitter);
            let turned = apply_transform(&base, &t, 1.0);
            let noisy = GrayImage::from_fn(turned.width(), turned.height(), |x, y| {
                turned.get(x, y) + rng.gen_range(-0.02..0.02)
            });
            let path = dir.join(format!("frame_{k:05}.png"));
            noisy.save_png(&path)?;
            Ok(path)
        })
        .collect()
}
