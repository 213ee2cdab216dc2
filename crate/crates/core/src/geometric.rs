//! Flipping, rotation about the image center, and five-crop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{sample_bilinear, to_channel, RawImage, STANDARD_SIZE};

/// Angles used by the rotation scheme, in degrees.
pub const DEFAULT_ROTATION_ANGLES: [f64; 2] = [-30.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    /// Degrees, counter-clockwise as displayed (y axis pointing down).
    theta: f64,
}

impl RotationParams {
    /// Accepts any finite angle and wraps it into `(-180, 180]`.
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("rotation angle {theta}")));
        }
        let mut t = theta.rem_euclid(360.0);
        if t > 180.0 {
            t -= 360.0;
        }
        Ok(Self { theta: t })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropParams {
    crop_size: usize,
    source_size: usize,
}

impl Default for CropParams {
    fn default() -> Self {
        Self { crop_size: 224, source_size: STANDARD_SIZE }
    }
}

impl CropParams {
    pub fn new(crop_size: usize, source_size: usize) -> Result<Self> {
        if crop_size == 0 || crop_size > source_size {
            return Err(Error::InvalidArgument(format!(
                "crop size {crop_size} must be in 1..={source_size}"
            )));
        }
        Ok(Self { crop_size, source_size })
    }

    pub fn crop_size(&self) -> usize {
        self.crop_size
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    /// Top-left corners in output order: top-left, top-right, bottom-left,
    /// bottom-right, center.
    pub fn offsets(&self) -> [(usize, usize); 5] {
        let far = self.source_size - self.crop_size;
        let mid = far / 2;
        [(0, 0), (far, 0), (0, far), (far, far), (mid, mid)]
    }
}

/// Mirrors the image across its vertical axis.
pub fn flip_horizontal(img: &RawImage) -> RawImage {
    let w = img.width();
    let mut out = img.clone();
    for row in out.pixels_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    out
}

/// Rotates about the pixel-grid center by inverse mapping with bilinear
/// sampling. Destinations whose preimage leaves the source are black.
pub fn rotate(img: &RawImage, params: RotationParams) -> RawImage {
    if params.theta == 0.0 || (img.width() == 1 && img.height() == 1) {
        return img.clone();
    }
    let rad = params.theta.to_radians();
    let (sin, cos) = rad.sin_cos();
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    RawImage::from_fn(img.width(), img.height(), |x, y| {
        // math-oriented offsets (v points up)
        let u = x as f64 - cx;
        let v = cy - y as f64;
        // apply R(-theta)
        let su = u * cos + v * sin;
        let sv = -u * sin + v * cos;
        match sample_bilinear(img, cx + su, cy - sv) {
            Some(rgb) => rgb.map(to_channel),
            None => [0, 0, 0],
        }
    })
}

/// Extracts the four corner crops and the center crop, in that order.
pub fn five_crop(img: &RawImage, params: CropParams) -> Result<[RawImage; 5]> {
    let s = params.source_size;
    if img.width() != s || img.height() != s {
        return Err(Error::DimensionMismatch {
            expected: format!("{s}x{s}"),
            actual: format!("{}x{}", img.width(), img.height()),
        });
    }
    let c = params.crop_size;
    let crop = |(x, y): (usize, usize)| img.crop(x, y, c, c);
    let [a, b, d, e, f] = params.offsets();
    Ok([crop(a)?, crop(b)?, crop(d)?, crop(e)?, crop(f)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: [u8; 3] = [10, 0, 0];
    const B: [u8; 3] = [20, 0, 0];
    const C: [u8; 3] = [30, 0, 0];
    const D: [u8; 3] = [40, 0, 0];

    fn distinct(w: usize, h: usize) -> RawImage {
        RawImage::from_fn(w, h, |x, y| [(y * w + x) as u8, x as u8, y as u8])
    }

    #[test]
    fn flip_minimal_and_index_oracle() {
        let img = RawImage::new(2, 1, vec![A, B]).unwrap();
        assert_eq!(flip_horizontal(&img).pixels(), &[B, A]);

        let img = distinct(3, 2);
        let out = flip_horizontal(&img);
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(out.get(x, y), img.get(2 - x, y));
            }
        }
        assert_eq!(flip_horizontal(&out), img);
    }

    #[test]
    fn rotate_identity_and_half_turn() {
        let img = distinct(5, 4);
        assert_eq!(rotate(&img, RotationParams::new(0.0).unwrap()), img);

        let img = RawImage::new(2, 2, vec![A, B, C, D]).unwrap();
        let out = rotate(&img, RotationParams::new(180.0).unwrap());
        assert_eq!(out.pixels(), &[D, C, B, A]);
    }

    #[test]
    fn half_turn_is_exact_on_even_grid() {
        let img = distinct(6, 4);
        let out = rotate(&img, RotationParams::new(180.0).unwrap());
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(out.get(x, y), img.get(5 - x, 3 - y));
            }
        }
    }

    #[test]
    fn quarter_turn_is_counter_clockwise() {
        // 3x3 with a marked pixel right of center: CCW a quarter turn moves it above center.
        let mut img = RawImage::filled(3, 3, [0; 3]);
        img.set(2, 1, [200, 0, 0]);
        let out = rotate(&img, RotationParams::new(90.0).unwrap());
        assert_eq!(out.get(1, 0), [200, 0, 0]);
        assert_eq!(out.get(2, 1), [0, 0, 0]);
    }

    #[test]
    fn corners_go_black_under_rotation() {
        let img = RawImage::filled(32, 32, [90, 90, 90]);
        let out = rotate(&img, RotationParams::new(30.0).unwrap());
        assert_eq!(out.get(0, 0), [0; 3]);
        assert_eq!(out.get(16, 16), [90; 3]);
    }

    #[test]
    fn single_pixel_rotation_is_fixpoint() {
        let img = RawImage::new(1, 1, vec![[1, 2, 3]]).unwrap();
        assert_eq!(rotate(&img, RotationParams::new(37.0).unwrap()), img);
    }

    #[test]
    fn angle_wraps_into_half_open_range() {
        assert_eq!(RotationParams::new(-180.0).unwrap().theta(), 180.0);
        assert_eq!(RotationParams::new(390.0).unwrap().theta(), 30.0);
        assert_eq!(RotationParams::new(-30.0).unwrap().theta(), -30.0);
        assert!(RotationParams::new(f64::NAN).is_err());
    }

    #[test]
    fn five_crop_defaults() {
        let img = RawImage::from_fn(256, 256, |x, y| [x as u8, y as u8, 7]);
        let crops = five_crop(&img, CropParams::default()).unwrap();
        assert_eq!(CropParams::default().offsets()[4], (16, 16));
        let expected_origin = [(0, 0), (32, 0), (0, 32), (32, 32), (16, 16)];
        for (crop, (ox, oy)) in crops.iter().zip(expected_origin) {
            assert_eq!((crop.width(), crop.height()), (224, 224));
            assert_eq!(crop.get(0, 0), img.get(ox, oy));
            assert_eq!(crop.get(223, 223), img.get(ox + 223, oy + 223));
        }
    }

    #[test]
    fn five_crop_uniform_and_full() {
        let img = RawImage::filled(256, 256, [5, 6, 7]);
        for c in five_crop(&img, CropParams::default()).unwrap() {
            assert_eq!(c, RawImage::filled(224, 224, [5, 6, 7]));
        }
        let img = distinct(8, 8);
        for c in five_crop(&img, CropParams::new(8, 8).unwrap()).unwrap() {
            assert_eq!(c, img);
        }
    }

    #[test]
    fn five_crop_rejects_wrong_size() {
        let img = RawImage::filled(255, 256, [0; 3]);
        assert!(matches!(five_crop(&img, CropParams::default()), Err(Error::DimensionMismatch { .. })));
        assert!(CropParams::new(0, 8).is_err());
        assert!(CropParams::new(9, 8).is_err());
    }

    /// Smooth test pattern: low-frequency sinusoids, so bilinear resampling
    /// error stays small.
    fn smooth(size: usize, phase: [f64; 3], freq: f64) -> RawImage {
        RawImage::from_fn(size, size, |x, y| {
            let mut px = [0u8; 3];
            for c in 0..3 {
                let t = (x as f64 * freq + phase[c]).sin() * (y as f64 * freq * 0.7 + phase[c]).cos();
                px[c] = to_channel(127.5 + 100.0 * t);
            }
            px
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rotation_round_trip_on_interior_disk(
            theta in -179.0f64..180.0,
            phase in proptest::array::uniform3(0.0..std::f64::consts::TAU),
            freq in 0.02f64..0.12,
        ) {
            let size = 40;
            let img = smooth(size, phase, freq);
            let there = rotate(&img, RotationParams::new(theta).unwrap());
            let back = rotate(&there, RotationParams::new(-theta).unwrap());
            let c = (size as f64 - 1.0) / 2.0;
            let radius = size as f64 / 2.0 - 2.0;
            for y in 0..size {
                for x in 0..size {
                    if (x as f64 - c).hypot(y as f64 - c) >= radius { continue; }
                    for ch in 0..3 {
                        let d = (img.get(x, y)[ch] as i32 - back.get(x, y)[ch] as i32).abs();
                        prop_assert!(d <= 8, "theta {} at ({},{}) ch {} differs by {}", theta, x, y, ch, d);
                    }
                }
            }
        }

        #[test]
        fn rotation_stays_in_gamut(theta in -179.0f64..180.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = RawImage::from_fn(9, 7, |_, _| [rng.random_range(40..200), rng.random_range(40..200), rng.random_range(40..200)]);
            let (lo, hi) = img.pixels().iter().flatten().fold((255u8, 0u8), |(l, h), &v| (l.min(v), h.max(v)));
            let out = rotate(&img, RotationParams::new(theta).unwrap());
            for &v in out.pixels().iter().flatten() {
                prop_assert!(v == 0 || (lo..=hi).contains(&v));
            }
        }

        #[test]
        fn flip_preserves_pixel_multiset(seed in any::<u64>(), w in 1usize..12, h in 1usize..12) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = RawImage::from_fn(w, h, |_, _| rng.random());
            let flipped = flip_horizontal(&img);
            let mut a = img.pixels().to_vec();
            let mut b = flipped.pixels().to_vec();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            prop_assert_eq!(flip_horizontal(&flipped), img);
        }
    }
}
