//! Per-image fancy PCA color perturbation.
//!
//! The principal axes of an image's RGB distribution come from a one-sided
//! Jacobi SVD of the mean-centered `N x 3` pixel matrix `M`. The right
//! singular vectors are the eigenvectors of the covariance `M^T M / (N-1)`
//! and the reported eigenvalues are `sigma^2 / (N-1)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{to_channel, RawImage};

/// Divisor applied to the eigenvalue-weighted offset.
pub const DEFAULT_PCA_SCALE: f64 = 5e6;
/// Standard deviation of each Gaussian coefficient.
pub const DEFAULT_ALPHA_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FancyPcaBasis {
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    eigenvectors: [[f64; 3]; 3],
    eigenvalues: [f64; 3],
    scale: f64,
}

impl FancyPcaBasis {
    /// Builds a basis from explicit parts, checking orthonormality and order.
    pub fn new(eigenvectors: [[f64; 3]; 3], eigenvalues: [f64; 3], scale: f64) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|r| eigenvectors[r][i] * eigenvectors[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("eigenvector columns are not orthonormal".into()));
                }
            }
        }
        if eigenvalues.iter().any(|&l| !(l >= -1e-12)) || eigenvalues[0] < eigenvalues[1] || eigenvalues[1] < eigenvalues[2] {
            return Err(Error::InvalidArgument(format!("eigenvalues {eigenvalues:?} must be sorted non-increasing and >= 0")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {scale} must be positive")));
        }
        Ok(Self { eigenvectors, eigenvalues: eigenvalues.map(|l| l.max(0.0)), scale })
    }

    /// Row-major 3x3 matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &[[f64; 3]; 3] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> [f64; 3] {
        [self.eigenvectors[0][i], self.eigenvectors[1][i], self.eigenvectors[2][i]]
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigenvalues
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {scale} must be positive")));
        }
        self.scale = scale;
        Ok(self)
    }

    /// `P (alpha_i * lambda_i) / scale`, the color shift shared by every pixel.
    pub fn offset(&self, draw: &AlphaDraw) -> [f64; 3] {
        let weights: [f64; 3] = std::array::from_fn(|i| draw.alphas[i] * self.eigenvalues[i]);
        std::array::from_fn(|r| (0..3).map(|i| self.eigenvectors[r][i] * weights[i]).sum::<f64>() / self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDraw {
    pub alphas: [f64; 3],
}

impl AlphaDraw {
    pub fn zero() -> Self {
        Self { alphas: [0.0; 3] }
    }

    /// Three independent draws from N(0, std^2).
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Self {
        let normal = Normal::new(0.0, std).expect("finite, non-negative std");
        Self { alphas: std::array::from_fn(|_| normal.sample(rng)) }
    }
}

/// Principal color axes of `img` with the default scale.
pub fn compute_pca_basis(img: &RawImage) -> Result<FancyPcaBasis> {
    let n = img.pixels().len();
    if n < 3 {
        return Err(Error::DegenerateImage(n));
    }
    let mut mean = [0.0; 3];
    for p in img.pixels() {
        for c in 0..3 {
            mean[c] += p[c] as f64;
        }
    }
    mean = mean.map(|s| s / n as f64);
    let mut columns: [Vec<f64>; 3] =
        std::array::from_fn(|c| img.pixels().iter().map(|p| p[c] as f64 - mean[c]).collect());

    let v = jacobi_svd(&mut columns);
    let denom = (n - 1) as f64;
    let mut pairs: Vec<(f64, [f64; 3])> = (0..3)
        .map(|j| {
            let sigma_sq: f64 = columns[j].iter().map(|x| x * x).sum();
            (sigma_sq / denom, [v[0][j], v[1][j], v[2][j]])
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut eigenvectors = [[0.0; 3]; 3];
    let mut eigenvalues = [0.0; 3];
    for (i, (lambda, mut vec)) in pairs.into_iter().enumerate() {
        let lead = vec.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            vec = vec.map(|x| -x);
        }
        for r in 0..3 {
            eigenvectors[r][i] = vec[r];
        }
        eigenvalues[i] = lambda.max(0.0);
    }
    FancyPcaBasis::new(eigenvectors, eigenvalues, DEFAULT_PCA_SCALE)
}

/// Orthogonalizes the three columns in place by plane rotations and returns
/// the accumulated right rotation `V` (row-major). On return column `j`
/// equals `sigma_j u_j`.
fn jacobi_svd(columns: &mut [Vec<f64>; 3]) -> [[f64; 3]; 3] {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..60 {
        let mut rotated = false;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (alpha, beta, gamma) = column_products(&columns[i], &columns[j]);
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let t = if zeta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            let (left, right) = columns.split_at_mut(j);
            for (a, b) in left[i].iter_mut().zip(right[0].iter_mut()) {
                let (x, y) = (*a, *b);
                *a = c * x - s * y;
                *b = s * x + c * y;
            }
            for row in v.iter_mut() {
                let (x, y) = (row[i], row[j]);
                row[i] = c * x - s * y;
                row[j] = s * x + c * y;
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

fn column_products(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut aa = 0.0;
    let mut bb = 0.0;
    let mut ab = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        aa += x * x;
        bb += y * y;
        ab += x * y;
    }
    (aa, bb, ab)
}

/// Adds the basis offset for `draw` to every pixel.
pub fn fancy_pca(img: &RawImage, basis: &FancyPcaBasis, draw: &AlphaDraw) -> RawImage {
    let o = basis.offset(draw);
    img.map_pixels(|p| std::array::from_fn(|c| to_channel(p[c] as f64 + o[c])))
}
