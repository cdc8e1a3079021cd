//! Grayscale images, the three base transformations, resampling, and the
//! conversion between square images and polar pictures.
//!
//! Pixel centres sit at integer coordinates; the image centre is
//! `((width - 1) / 2, (height - 1) / 2)`. Transforms are applied by inverse
//! mapping with bilinear interpolation, reading zero outside the source.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PolarGeometry;

/// Anything laid out as a row-major grid of intensities that a planar
/// network can consume and produce.
pub trait Raster: Sized {
    /// (rows, cols)
    fn grid_dims(&self) -> (usize, usize);
    fn values(&self) -> &[f64];
    /// A raster of the same kind and layout holding `values`.
    fn with_values(&self, values: Vec<f64>) -> Self;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    /// Builds an image from `f(x, y)`, clamping into [0, 1].
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len().max(1) as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let var = self.pixels.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            / self.pixels.len().max(1) as f64;
        var.sqrt()
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// Bilinear sample at continuous pixel coordinates; neighbours outside the
    /// image contribute zero.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let at = |xi: i64, yi: i64| -> f64 {
            if xi < 0 || yi < 0 || xi >= self.width as i64 || yi >= self.height as i64 {
                0.0
            } else {
                self.pixels[yi as usize * self.width + xi as usize]
            }
        };
        // Skip zero-weight taps so exact lattice reads touch a single pixel.
        let mut acc = 0.0;
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                acc += wy * wx * at(x0 + dx, y0 + dy);
            }
        }
        acc.clamp(0.0, 1.0)
    }

    /// Decodes any supported image file, converting colour to luma with
    /// 0.299 R + 0.587 G + 0.114 B.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(gray) => Self::from_fn(
                gray.width() as usize,
                gray.height() as usize,
                |x, y| gray.get_pixel(x as u32, y as u32)[0] as f64 / 255.0,
            ),
            other => {
                let rgb = other.to_rgb8();
                Self::from_fn(rgb.width() as usize, rgb.height() as usize, |x, y| {
                    let p = rgb.get_pixel(x as u32, y as u32);
                    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
                })
            }
        }
    }

    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize);
            Luma([(v * 255.0).round() as u8])
        })
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl Raster for GrayImage {
    fn grid_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn values(&self) -> &[f64] {
        &self.pixels
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.pixels.len());
        Self {
            width: self.width,
            height: self.height,
            pixels: values,
        }
    }
}

/// A parametric base transformation. Translation is in network pixels with
/// `dy > 0` meaning upwards; rotation is counter-clockwise about the image
/// centre; scaling is about the image centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransformSpec {
    Translate { dx: f64, dy: f64 },
    Rotate { degrees: f64 },
    Scale { factor: f64 },
}

impl TransformSpec {
    pub fn translate(dx: f64, dy: f64) -> Self {
        TransformSpec::Translate { dx, dy }
    }

    pub fn rotate(degrees: f64) -> Self {
        TransformSpec::Rotate { degrees }
    }

    pub fn scale(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("scale factor must be positive, got {factor}")));
        }
        Ok(TransformSpec::Scale { factor })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Translate { .. } => "translate",
            TransformSpec::Rotate { .. } => "rotate",
            TransformSpec::Scale { .. } => "scale",
        }
    }

    pub fn same_variant(&self, other: &TransformSpec) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    /// The identity of this transform's variant.
    pub fn identity(&self) -> Self {
        self.power(0)
    }

    /// `self` applied `j` times, composed analytically.
    pub fn power(&self, j: u32) -> Self {
        let k = j as f64;
        match *self {
            TransformSpec::Translate { dx, dy } => TransformSpec::Translate {
                dx: dx * k,
                dy: dy * k,
            },
            TransformSpec::Rotate { degrees } => TransformSpec::Rotate {
                degrees: degrees * k,
            },
            TransformSpec::Scale { factor } => TransformSpec::Scale {
                factor: factor.powi(j as i32),
            },
        }
    }

    /// `self ∘ first`: apply `first`, then `self`. Both must share a variant.
    pub fn after(&self, first: &TransformSpec) -> Result<Self> {
        match (*self, *first) {
            (TransformSpec::Translate { dx, dy }, TransformSpec::Translate { dx: ax, dy: ay }) => {
                Ok(TransformSpec::Translate {
                    dx: dx + ax,
                    dy: dy + ay,
                })
            }
            (TransformSpec::Rotate { degrees }, TransformSpec::Rotate { degrees: a }) => {
                Ok(TransformSpec::Rotate {
                    degrees: degrees + a,
                })
            }
            (TransformSpec::Scale { factor }, TransformSpec::Scale { factor: a }) => {
                Ok(TransformSpec::Scale { factor: factor * a })
            }
            _ => Err(Error::invalid(format!(
                "cannot compose {} with {}",
                self.name(),
                first.name()
            ))),
        }
    }

    /// Maps an output pixel back to its source location. `unit` converts
    /// network pixels to image pixels for translations.
    fn inverse_map(&self, center: (f64, f64), unit: f64) -> impl Fn(f64, f64) -> (f64, f64) {
        let (cx, cy) = center;
        // (a, b, c, d, tx, ty): source = [a b; c d] * (out - centre) + centre + t
        let coeffs = match *self {
            TransformSpec::Translate { dx, dy } => (1.0, 0.0, 0.0, 1.0, -dx * unit, dy * unit),
            TransformSpec::Rotate { degrees } => {
                let (s, c) = degrees.to_radians().sin_cos();
                // Forward (screen, y down): x' = c x + s y, y' = -s x + c y.
                (c, -s, s, c, 0.0, 0.0)
            }
            TransformSpec::Scale { factor } => (1.0 / factor, 0.0, 0.0, 1.0 / factor, 0.0, 0.0),
        };
        let (a, b, c, d, tx, ty) = coeffs;
        move |x, y| {
            let (u, v) = (x - cx, y - cy);
            (a * u + b * v + cx + tx, c * u + d * v + cy + ty)
        }
    }
}

/// Resamples `img` under `t`. Translation parameters are multiplied by
/// `scale_ratio` (image pixels per network pixel).
pub fn apply_transform(img: &GrayImage, t: &TransformSpec, scale_ratio: f64) -> GrayImage {
    transform_window(img, t, scale_ratio, 0, 0, img.width, img.height)
}

/// `crop_center(apply_transform(img, t, scale_ratio), out_w, out_h)` without
/// resampling the discarded border.
pub fn transform_and_crop(
    img: &GrayImage,
    t: &TransformSpec,
    scale_ratio: f64,
    out_w: usize,
    out_h: usize,
) -> Result<GrayImage> {
    let (x0, y0) = crop_origin(img, out_w, out_h)?;
    Ok(transform_window(img, t, scale_ratio, x0, y0, out_w, out_h))
}

fn transform_window(
    img: &GrayImage,
    t: &TransformSpec,
    scale_ratio: f64,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> GrayImage {
    let map = t.inverse_map(img.center(), scale_ratio);
    let mut pixels = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let (sx, sy) = map(x as f64, y as f64);
            pixels.push(img.sample_bilinear(sx, sy));
        }
    }
    GrayImage {
        width: w,
        height: h,
        pixels,
    }
}

/// Normalised triangle-filter taps for resampling `src` samples to `dst`.
/// When shrinking, the filter support widens with the reduction factor so
/// every source pixel contributes; when enlarging it is plain linear
/// interpolation.
fn triangle_taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = (center - support).floor().max(0.0) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (lo..hi)
                .filter_map(|k| {
                    let w = 1.0 - ((k as f64 + 0.5 - center) / support).abs();
                    (w > 0.0).then_some((k, w))
                })
                .collect();
            let total: f64 = taps.iter().map(|(_, w)| w).sum();
            for tap in &mut taps {
                tap.1 /= total;
            }
            taps
        })
        .collect()
}

/// Separable triangle-filter resampling to `out_w`×`out_h`.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 || img.width == 0 || img.height == 0 {
        return Err(Error::invalid("resize needs non-empty source and target"));
    }
    let cols = triangle_taps(img.width, out_w);
    let rows = triangle_taps(img.height, out_h);
    let mut horizontal = vec![0.0; out_w * img.height];
    for y in 0..img.height {
        let line = &img.pixels[y * img.width..(y + 1) * img.width];
        for (x, taps) in cols.iter().enumerate() {
            horizontal[y * out_w + x] = taps.iter().map(|&(k, w)| w * line[k]).sum();
        }
    }
    let mut pixels = vec![0.0; out_w * out_h];
    for (y, taps) in rows.iter().enumerate() {
        for x in 0..out_w {
            let v: f64 = taps.iter().map(|&(k, w)| w * horizontal[k * out_w + x]).sum();
            pixels[y * out_w + x] = v.clamp(0.0, 1.0);
        }
    }
    Ok(GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    })
}

/// Area-consistent bilinear reduction: a triangle filter whose support
/// equals the reduction factor, normalised per output pixel.
pub fn downscale_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("downscale target must be at least 1x1"));
    }
    if out_w > img.width || out_h > img.height {
        return Err(Error::invalid(format!(
            "downscale from {}x{} to {out_w}x{out_h} would upscale; use upscale_nearest",
            img.width, img.height
        )));
    }
    resize_bilinear(img, out_w, out_h)
}

/// Replicates each pixel into a `factor`×`factor` block.
pub fn upscale_nearest(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 {
        return Err(Error::invalid("upscale factor must be at least 1"));
    }
    Ok(GrayImage::from_fn(
        img.width * factor,
        img.height * factor,
        |x, y| img.get(x / factor, y / factor),
    ))
}

fn crop_origin(img: &GrayImage, out_w: usize, out_h: usize) -> Result<(usize, usize)> {
    if out_w > img.width || out_h > img.height {
        return Err(Error::invalid(format!(
            "cannot crop {out_w}x{out_h} from {}x{}",
            img.width, img.height
        )));
    }
    Ok(((img.width - out_w) / 2, (img.height - out_h) / 2))
}

pub fn crop_center(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    let (x0, y0) = crop_origin(img, out_w, out_h)?;
    Ok(GrayImage::from_fn(out_w, out_h, |x, y| img.get(x0 + x, y0 + y)))
}

/// Largest centred square.
pub fn crop_square(img: &GrayImage) -> GrayImage {
    let side = img.width.min(img.height);
    crop_center(img, side, side).expect("square fits inside its source")
}

/// Pixels at or above `level` become 1, the rest 0.
pub fn threshold(img: &GrayImage, level: f64) -> GrayImage {
    img.with_values(
        img.pixels
            .iter()
            .map(|&v| if v >= level { 1.0 } else { 0.0 })
            .collect(),
    )
}

/// Sector intensities of a polar picture, ring-major (`ring * wedges + wedge`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarImage {
    geometry: PolarGeometry,
    sectors: Vec<f64>,
}

impl PolarImage {
    pub fn new(geometry: PolarGeometry, sectors: Vec<f64>) -> Result<Self> {
        if sectors.len() != geometry.rings * geometry.wedges {
            return Err(Error::invalid(format!(
                "{} sectors supplied for a {}x{} polar picture",
                sectors.len(),
                geometry.rings,
                geometry.wedges
            )));
        }
        if let Some(bad) = sectors.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("sector value {bad} outside [0, 1]")));
        }
        Ok(Self { geometry, sectors })
    }

    pub fn geometry(&self) -> &PolarGeometry {
        &self.geometry
    }

    pub fn sectors(&self) -> &[f64] {
        &self.sectors
    }

    pub fn get(&self, ring: usize, wedge: usize) -> f64 {
        self.sectors[ring * self.geometry.wedges + wedge]
    }

    /// Rotates the wedge axis: output wedge `w` takes input wedge `w - shift`.
    pub fn shift_wedges(&self, shift: isize) -> Self {
        let wedges = self.geometry.wedges as isize;
        let mut out = self.sectors.clone();
        for ring in 0..self.geometry.rings {
            for w in 0..wedges {
                let src = (w - shift).rem_euclid(wedges) as usize;
                out[ring * wedges as usize + w as usize] = self.get(ring, src);
            }
        }
        self.with_values(out)
    }
}

impl Raster for PolarImage {
    fn grid_dims(&self) -> (usize, usize) {
        (self.geometry.rings, self.geometry.wedges)
    }

    fn values(&self) -> &[f64] {
        &self.sectors
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.sectors.len());
        Self {
            geometry: self.geometry.clone(),
            sectors: values,
        }
    }
}

/// Offset of pixel (x, y) from the centre of an `n`×`n` image, `y` up.
fn centered(x: usize, y: usize, n: usize) -> (f64, f64) {
    let c = (n as f64 - 1.0) / 2.0;
    (x as f64 - c, c - y as f64)
}

/// Averages the pixels whose centres fall inside each sector. Sectors that
/// capture no pixel centre take the bilinear sample at their centroid.
pub fn to_polar(img: &GrayImage, geometry: &PolarGeometry) -> Result<PolarImage> {
    let n = geometry.source_size;
    if img.width != n || img.height != n {
        return Err(Error::invalid(format!(
            "polar conversion expects a {n}x{n} image, got {}x{}",
            img.width, img.height
        )));
    }
    let count = geometry.rings * geometry.wedges;
    let mut sums = vec![0.0; count];
    let mut hits = vec![0usize; count];
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = centered(x, y, n);
            let Some(ring) = geometry.ring_of_radius(dx.hypot(dy)) else {
                continue;
            };
            let wedge = geometry.wedge_of_angle(dy.atan2(dx));
            let idx = ring * geometry.wedges + wedge;
            sums[idx] += img.get(x, y);
            hits[idx] += 1;
        }
    }
    let c = (n as f64 - 1.0) / 2.0;
    let sectors = (0..count)
        .map(|idx| {
            if hits[idx] > 0 {
                (sums[idx] / hits[idx] as f64).clamp(0.0, 1.0)
            } else {
                let (ring, wedge) = (idx / geometry.wedges, idx % geometry.wedges);
                let (ux, uy) = geometry.sector_centroid(ring, wedge);
                img.sample_bilinear(c + ux, c - uy)
            }
        })
        .collect();
    Ok(PolarImage {
        geometry: geometry.clone(),
        sectors,
    })
}

/// Paints each pixel of an `out_size`×`out_size` image with the sector that
/// contains it; the blind spot and the exterior are black.
pub fn from_polar(p: &PolarImage, out_size: usize) -> Result<GrayImage> {
    let g = &p.geometry;
    if out_size < g.source_size {
        return Err(Error::invalid(format!(
            "polar rendering needs at least {} px, got {out_size}",
            g.source_size
        )));
    }
    let scale = g.source_size as f64 / out_size as f64;
    Ok(GrayImage::from_fn(out_size, out_size, |x, y| {
        let (dx, dy) = centered(x, y, out_size);
        let (dx, dy) = (dx * scale, dy * scale);
        match g.ring_of_radius(dx.hypot(dy)) {
            Some(ring) => p.get(ring, g.wedge_of_angle(dy.atan2(dx))),
            None => 0.0,
        }
    }))
}

/// A network-sized input or output in either topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Picture {
    Gray(GrayImage),
    Polar(PolarImage),
}

impl Picture {
    /// Flattens to a viewable image; polar pictures are painted at `polar_size`.
    pub fn to_gray(&self, polar_size: usize) -> Result<GrayImage> {
        match self {
            Picture::Gray(img) => Ok(img.clone()),
            Picture::Polar(p) => from_polar(p, polar_size.max(p.geometry.source_size)),
        }
    }

    pub fn threshold(&self, level: f64) -> Self {
        let values = self
            .values()
            .iter()
            .map(|&v| if v >= level { 1.0 } else { 0.0 })
            .collect();
        self.with_values(values)
    }
}

impl Raster for Picture {
    fn grid_dims(&self) -> (usize, usize) {
        match self {
            Picture::Gray(i) => i.grid_dims(),
            Picture::Polar(p) => p.grid_dims(),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Picture::Gray(i) => i.values(),
            Picture::Polar(p) => p.values(),
        }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        match self {
            Picture::Gray(i) => Picture::Gray(i.with_values(values)),
            Picture::Polar(p) => Picture::Polar(p.with_values(values)),
        }
    }
}
