//! Shared fixtures for the criterion benchmarks in `benches/`.

use augbench_core::seeding::derive;
use augbench_core::RawImage;

/// Deterministic noise image; every pixel is hashed from `(seed, x, y)`.
pub fn noise_image(width: usize, height: usize, seed: u64) -> RawImage {
    RawImage::from_fn(width, height, |x, y| {
        let b = derive(seed, &[x as u64, y as u64]).to_le_bytes();
        [b[0], b[1], b[2]]
    })
}
