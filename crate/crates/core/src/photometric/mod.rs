//! Color jittering, edge enhancement and fancy PCA.
//!
//! All three keep the image geometry and only remap channel values.

mod pca;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{invert, to_channel, to_grayscale, RawImage, Rgb};

pub use pca::{compute_pca_basis, fancy_pca, AlphaDraw, FancyPcaBasis, DEFAULT_ALPHA_STD, DEFAULT_PCA_SCALE};

/// Fixed hue/saturation/brightness adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    delta_hue: f64,
    delta_saturation: f64,
    delta_brightness: f64,
}

impl Default for JitterParams {
    /// Moderate fixed shifts. These are tuning defaults, not canonical values.
    fn default() -> Self {
        Self { delta_hue: 0.05, delta_saturation: 0.15, delta_brightness: 0.15 }
    }
}

impl JitterParams {
    pub fn new(delta_hue: f64, delta_saturation: f64, delta_brightness: f64) -> Result<Self> {
        if !(delta_hue.abs() <= 0.5) {
            return Err(Error::InvalidArgument(format!("hue delta {delta_hue} outside [-0.5, 0.5]")));
        }
        for (name, d) in [("saturation", delta_saturation), ("brightness", delta_brightness)] {
            if !(d.abs() <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} delta {d} outside [-1, 1]")));
            }
        }
        Ok(Self { delta_hue, delta_saturation, delta_brightness })
    }

    pub fn delta_hue(&self) -> f64 {
        self.delta_hue
    }

    pub fn delta_saturation(&self) -> f64 {
        self.delta_saturation
    }

    pub fn delta_brightness(&self) -> f64 {
        self.delta_brightness
    }
}

/// Hexcone RGB -> (hue in [0,1), saturation, brightness).
pub fn rgb_to_hsb(p: Rgb) -> [f64; 3] {
    let [r, g, b] = p.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let brightness = max;
    let saturation = if max > 0.0 { delta / max } else { 0.0 };
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [hue.rem_euclid(1.0), saturation, brightness]
}

pub fn hsb_to_rgb([h, s, v]: [f64; 3]) -> Rgb {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| to_channel(c * 255.0))
}

/// Shifts hue (modulo one turn), saturation and brightness (clamped) of
/// every pixel by fixed amounts.
pub fn color_jitter(img: &RawImage, params: JitterParams) -> RawImage {
    img.map_pixels(|p| {
        let [h, s, b] = rgb_to_hsb(p);
        hsb_to_rgb([
            (h + params.delta_hue).rem_euclid(1.0),
            (s + params.delta_saturation).clamp(0.0, 1.0),
            (b + params.delta_brightness).clamp(0.0, 1.0),
        ])
    })
}

/// Per-channel Sobel gradient magnitude with replicate-edge padding.
pub fn sobel_gradient(img: &RawImage) -> RawImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |x: isize, y: isize, c: usize| -> f64 {
        img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize)[c] as f64
    };
    RawImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut out = [0u8; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let gx = (at(x + 1, y - 1, c) + 2.0 * at(x + 1, y, c) + at(x + 1, y + 1, c))
                - (at(x - 1, y - 1, c) + 2.0 * at(x - 1, y, c) + at(x - 1, y + 1, c));
            let gy = (at(x - 1, y + 1, c) + 2.0 * at(x, y + 1, c) + at(x + 1, y + 1, c))
                - (at(x - 1, y - 1, c) + 2.0 * at(x, y - 1, c) + at(x + 1, y - 1, c));
            *o = to_channel(gx.hypot(gy));
        }
        out
    })
}

/// Inverted grayscale edge map composited at 50% over the source.
pub fn edge_enhance(img: &RawImage) -> RawImage {
    let overlay = invert(&to_grayscale(&sobel_gradient(img)));
    let pixels = img
        .pixels()
        .iter()
        .zip(overlay.pixels())
        .map(|(a, t)| std::array::from_fn(|c| (a[c] as u16 + t[c] as u16).div_ceil(2) as u8))
        .collect();
    RawImage::new(img.width(), img.height(), pixels).expect("same geometry")
}
