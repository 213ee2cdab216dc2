//! Procedural texture images laid out as a class-per-directory dataset.
//!
//! Each class is one texture filling a rectangular patch at a random
//! position, size and period, in random colors over a noisy background, so
//! position and color carry no class information.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagecore::{save_image, RawImage};
use crate::seeding::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    HorizontalStripes,
    VerticalStripes,
    DiagonalStripes,
    Checkerboard,
    Dots,
    AntiDiagonalStripes,
    Rings,
    Grid,
}

impl Pattern {
    pub const ALL: [Pattern; 8] = [
        Pattern::HorizontalStripes,
        Pattern::VerticalStripes,
        Pattern::DiagonalStripes,
        Pattern::Checkerboard,
        Pattern::Dots,
        Pattern::AntiDiagonalStripes,
        Pattern::Rings,
        Pattern::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::HorizontalStripes => "hstripes",
            Pattern::VerticalStripes => "vstripes",
            Pattern::DiagonalStripes => "dstripes",
            Pattern::Checkerboard => "checker",
            Pattern::Dots => "dots",
            Pattern::AntiDiagonalStripes => "astripes",
            Pattern::Rings => "rings",
            Pattern::Grid => "grid",
        }
    }

    /// Foreground test at patch-local coordinates `(u, v)` in units of the
    /// pattern period.
    fn on(self, u: f64, v: f64) -> bool {
        let half = |t: f64| t.rem_euclid(1.0) < 0.5;
        match self {
            Pattern::HorizontalStripes => half(v),
            Pattern::VerticalStripes => half(u),
            Pattern::DiagonalStripes => half((u + v) / std::f64::consts::SQRT_2),
            Pattern::AntiDiagonalStripes => half((u - v) / std::f64::consts::SQRT_2),
            Pattern::Checkerboard => half(u) != half(v),
            Pattern::Dots => (u.rem_euclid(1.0) - 0.5).hypot(v.rem_euclid(1.0) - 0.5) < 0.3,
            Pattern::Rings => half(u.hypot(v)),
            Pattern::Grid => u.rem_euclid(1.0) < 0.25 || v.rem_euclid(1.0) < 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub min_side: usize,
    pub max_side: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { classes: 5, per_class: 16, min_side: 96, max_side: 160 }
    }
}

fn color(rng: &mut StreamRng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter().zip(&b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

/// One image of `pattern`, fully determined by `rng`.
pub fn render_pattern(pattern: Pattern, min_side: usize, max_side: usize, rng: &mut StreamRng) -> RawImage {
    let w = rng.random_range(min_side..=max_side);
    let h = rng.random_range(min_side..=max_side);
    let bg = color(rng);
    let mut fg = color(rng);
    while distance(fg, bg) < 120.0 {
        fg = color(rng);
    }
    let pw = (w as f64 * rng.random_range(0.4..0.7)) as usize;
    let ph = (h as f64 * rng.random_range(0.4..0.7)) as usize;
    let x0 = rng.random_range(0..=w - pw);
    let y0 = rng.random_range(0..=h - ph);
    let period = w.min(h) as f64 * rng.random_range(0.07..0.12);
    let phase: (f64, f64) = (rng.random(), rng.random());
    let noise = 20i32;
    RawImage::from_fn(w, h, |x, y| {
        let inside = (x0..x0 + pw).contains(&x) && (y0..y0 + ph).contains(&y);
        let u = (x as f64 - x0 as f64) / period + phase.0;
        let v = (y as f64 - y0 as f64) / period + phase.1;
        let base = if inside && pattern.on(u, v) { fg } else { bg };
        let n = rng.random_range(-noise..=noise);
        base.map(|c| (c as i32 + n).clamp(0, 255) as u8)
    })
}

/// Writes `spec.classes` directories of `spec.per_class` PPM images under
/// `root` and returns the file count per class.
pub fn write_synthetic_dataset(root: impl AsRef<Path>, spec: &SyntheticSpec, seed: u64) -> Result<BTreeMap<String, usize>> {
    let root = root.as_ref();
    if spec.classes == 0 || spec.classes > Pattern::ALL.len() {
        return Err(Error::InvalidArgument(format!("classes must be in 1..={}", Pattern::ALL.len())));
    }
    if spec.min_side < 8 || spec.min_side > spec.max_side {
        return Err(Error::InvalidArgument(format!("bad side range {}..={}", spec.min_side, spec.max_side)));
    }
    let mut counts = BTreeMap::new();
    for (i, &pattern) in Pattern::ALL[..spec.classes].iter().enumerate() {
        let class = format!("{i:02}_{}", pattern.name());
        let dir = root.join(&class);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for j in 0..spec.per_class {
            let mut rng = seeding::stream(seed, &[seeding::hash_str(&class), j as u64]);
            let img = render_pattern(pattern, spec.min_side, spec.max_side, &mut rng);
            save_image(&img, dir.join(format!("img_{j:04}.ppm")))?;
        }
        counts.insert(class, spec.per_class);
    }
    Ok(counts)
}
