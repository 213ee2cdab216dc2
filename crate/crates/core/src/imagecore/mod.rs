//! Image containers, file I/O, standardization and shared pixel utilities.
//!
//! Every real-to-8-bit conversion in the crate goes through [`to_channel`]:
//! round half away from zero, then clamp to `[0, 255]`.

mod ppm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ppm::{decode_ppm, encode_ppm};

/// Side length of the canvas every image is standardized onto.
pub const STANDARD_SIZE: usize = 256;

pub type Rgb = [u8; 3];

/// An 8-bit RGB image stored row-major.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl std::fmt::Debug for RawImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RawImage({}x{})", self.width, self.height)
    }
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height} ({} pixels)", width * height),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.pixels[y * self.width + x] = value;
    }

    /// Applies `f` to every pixel, keeping the geometry.
    pub fn map_pixels(&self, f: impl Fn(Rgb) -> Rgb) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("window {w}x{h}+{x0}+{y0} inside the image"),
                actual: format!("{}x{}", self.width, self.height),
            });
        }
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + w]);
        }
        Ok(Self { width: w, height: h, pixels })
    }

    /// Centers this image on a black `width`x`height` canvas, cropping
    /// whatever does not fit. Offsets round down.
    pub fn center_on_canvas(&self, width: usize, height: usize) -> Self {
        if self.width == width && self.height == height {
            return self.clone();
        }
        let mut out = RawImage::filled(width, height, [0, 0, 0]);
        let (sx, dx, w) = center_span(self.width, width);
        let (sy, dy, h) = center_span(self.height, height);
        for y in 0..h {
            let src = (sy + y) * self.width + sx;
            let dst = (dy + y) * width + dx;
            out.pixels[dst..dst + w].copy_from_slice(&self.pixels[src..src + w]);
        }
        out
    }
}

/// Returns (source offset, destination offset, length) of the overlap when a
/// span of `src` is centered in a span of `dst`.
fn center_span(src: usize, dst: usize) -> (usize, usize, usize) {
    if src >= dst {
        ((src - dst) / 2, 0, dst)
    } else {
        (0, (dst - src) / 2, src)
    }
}

/// An RGB image with channels scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl NormalizedImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// Channel-major (CHW) copy of the pixel data.
    pub fn to_chw(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; 3 * plane];
        for (i, px) in self.pixels.iter().enumerate() {
            for c in 0..3 {
                out[c * plane + i] = px[c];
            }
        }
        out
    }
}

/// Converts a real channel value to 8 bits: round half away from zero, clamp.
#[inline]
pub fn to_channel(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

/// Decodes an image file. PPM/PGM are always supported; PNG and JPEG need
/// the `codecs` feature.
pub fn load_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        return decode_ppm(&bytes);
    }
    decode_other(&bytes, path)
}

#[cfg(feature = "codecs")]
fn decode_other(bytes: &[u8], path: &Path) -> Result<RawImage> {
    let format = image::guess_format(bytes)
        .map_err(|_| Error::UnsupportedFormat(path.display().to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::UnsupportedFormat(format!("{} ({format:?})", path.display())));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::CorruptImage(format!("{}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = decoded.pixels().map(|p| p.0).collect();
    RawImage::new(w, h, pixels)
}

#[cfg(not(feature = "codecs"))]
fn decode_other(_bytes: &[u8], path: &Path) -> Result<RawImage> {
    Err(Error::UnsupportedFormat(path.display().to_string()))
}

/// Writes `img` as binary PPM (P6).
pub fn save_image(img: &RawImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(img)).map_err(|source| Error::Io { path: path.into(), source })
}

/// Samples `img` at real coordinates with bilinear interpolation. Returns
/// `None` when the point lies outside the pixel-center grid
/// `[0, w-1] x [0, h-1]` by more than a rounding tolerance.
pub fn sample_bilinear(img: &RawImage, x: f64, y: f64) -> Option<[f64; 3]> {
    const EPS: f64 = 1e-9;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    if !(x >= -EPS && x <= max_x + EPS && y >= -EPS && y <= max_y + EPS) {
        return None;
    }
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    Some(bilinear_clamped(img, x, y))
}

/// Bilinear sample at a point already known to lie inside the grid.
fn bilinear_clamped(img: &RawImage, x: f64, y: f64) -> [f64; 3] {
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Resizes with bilinear interpolation using pixel-center alignment.
pub fn resize_bilinear(img: &RawImage, width: usize, height: usize) -> RawImage {
    if width == img.width && height == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    RawImage::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        bilinear_clamped(img, u, v).map(to_channel)
    })
}

/// Scales `img` so its larger side is [`STANDARD_SIZE`] and centers it on a
/// black square canvas of that size.
pub fn standardize(img: &RawImage) -> RawImage {
    if img.width == STANDARD_SIZE && img.height == STANDARD_SIZE {
        return img.clone();
    }
    let scale = STANDARD_SIZE as f64 / img.width.max(img.height) as f64;
    let fit = |d: usize| ((d as f64 * scale).round() as usize).clamp(1, STANDARD_SIZE);
    let resized = resize_bilinear(img, fit(img.width), fit(img.height));
    resized.center_on_canvas(STANDARD_SIZE, STANDARD_SIZE)
}

pub fn normalize(img: &RawImage) -> NormalizedImage {
    NormalizedImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|p| p.map(|v| v as f64 / 255.0)).collect(),
    }
}

/// BT.601 luma.
#[inline]
pub fn luma(p: Rgb) -> u8 {
    to_channel(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
}

pub fn to_grayscale(img: &RawImage) -> RawImage {
    img.map_pixels(|p| {
        let g = luma(p);
        [g, g, g]
    })
}

pub fn invert(img: &RawImage) -> RawImage {
    img.map_pixels(|p| p.map(|v| 255 - v))
}
