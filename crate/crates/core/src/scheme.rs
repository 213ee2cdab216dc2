//! The closed set of augmentation schemes and how many variants each emits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{self, CropParams, RotationParams, DEFAULT_ROTATION_ANGLES};
use crate::imagecore::RawImage;
use crate::photometric::{self, AlphaDraw, JitterParams, DEFAULT_ALPHA_STD, DEFAULT_PCA_SCALE};
use crate::seeding::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    None,
    Flip,
    Rotate,
    Crop,
    Jitter,
    Edge,
    FancyPca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Baseline,
    Geometric,
    Photometric,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::None,
        SchemeKind::Flip,
        SchemeKind::Rotate,
        SchemeKind::Crop,
        SchemeKind::Jitter,
        SchemeKind::Edge,
        SchemeKind::FancyPca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::None => "none",
            SchemeKind::Flip => "flip",
            SchemeKind::Rotate => "rotate",
            SchemeKind::Crop => "crop",
            SchemeKind::Jitter => "jitter",
            SchemeKind::Edge => "edge",
            SchemeKind::FancyPca => "fancy_pca",
        }
    }

    /// Row label used in rendered result tables.
    pub fn title(self) -> &'static str {
        match self {
            SchemeKind::None => "Baseline",
            SchemeKind::Flip => "Flipping",
            SchemeKind::Rotate => "Rotating",
            SchemeKind::Crop => "Cropping",
            SchemeKind::Jitter => "Color Jittering",
            SchemeKind::Edge => "Edge Enhancement",
            SchemeKind::FancyPca => "Fancy PCA",
        }
    }

    pub fn category(self) -> Category {
        match self {
            SchemeKind::None => Category::Baseline,
            SchemeKind::Flip | SchemeKind::Rotate | SchemeKind::Crop => Category::Geometric,
            SchemeKind::Jitter | SchemeKind::Edge | SchemeKind::FancyPca => Category::Photometric,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}` (expected one of none, flip, rotate, crop, jitter, edge, fancy_pca)")))
    }
}

/// Tunable parameters shared by all schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSettings {
    pub rotation_angles: Vec<f64>,
    pub crop: CropParams,
    pub jitter: JitterParams,
    pub pca_scale: f64,
    pub alpha_std: f64,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        Self {
            rotation_angles: DEFAULT_ROTATION_ANGLES.to_vec(),
            crop: CropParams::default(),
            jitter: JitterParams::default(),
            pca_scale: DEFAULT_PCA_SCALE,
            alpha_std: DEFAULT_ALPHA_STD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationScheme {
    None,
    Flip,
    Rotate(Vec<RotationParams>),
    Crop(CropParams),
    Jitter(JitterParams),
    Edge,
    FancyPca { scale: f64, alpha_std: f64 },
}

impl AugmentationScheme {
    pub fn new(kind: SchemeKind, settings: &SchemeSettings) -> Result<Self> {
        Ok(match kind {
            SchemeKind::None => Self::None,
            SchemeKind::Flip => Self::Flip,
            SchemeKind::Rotate => {
                if settings.rotation_angles.is_empty() {
                    return Err(Error::InvalidArgument("rotation scheme needs at least one angle".into()));
                }
                Self::Rotate(settings.rotation_angles.iter().map(|&a| RotationParams::new(a)).collect::<Result<_>>()?)
            }
            SchemeKind::Crop => Self::Crop(settings.crop),
            SchemeKind::Jitter => Self::Jitter(settings.jitter),
            SchemeKind::Edge => Self::Edge,
            SchemeKind::FancyPca => {
                if !(settings.pca_scale > 0.0) || !(settings.alpha_std >= 0.0) {
                    return Err(Error::InvalidArgument("fancy PCA needs scale > 0 and alpha std >= 0".into()));
                }
                Self::FancyPca { scale: settings.pca_scale, alpha_std: settings.alpha_std }
            }
        })
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Self::None => SchemeKind::None,
            Self::Flip => SchemeKind::Flip,
            Self::Rotate(_) => SchemeKind::Rotate,
            Self::Crop(_) => SchemeKind::Crop,
            Self::Jitter(_) => SchemeKind::Jitter,
            Self::Edge => SchemeKind::Edge,
            Self::FancyPca { .. } => SchemeKind::FancyPca,
        }
    }

    /// Augmented images produced per original.
    pub fn variant_count(&self) -> usize {
        match self {
            Self::None => 0,
            Self::Rotate(angles) => angles.len(),
            Self::Crop(_) => 5,
            Self::Flip | Self::Jitter(_) | Self::Edge | Self::FancyPca { .. } => 1,
        }
    }

    /// Produces augmented variant `index` of `img`. Only fancy PCA consumes
    /// randomness.
    pub fn variant(&self, img: &RawImage, index: usize, rng: &mut StreamRng) -> Result<RawImage> {
        if index >= self.variant_count() {
            return Err(Error::InvalidArgument(format!(
                "variant {index} out of range for scheme {} ({} variants)",
                self.kind(),
                self.variant_count()
            )));
        }
        Ok(match self {
            Self::None => unreachable!("no variants"),
            Self::Flip => geometric::flip_horizontal(img),
            Self::Rotate(angles) => geometric::rotate(img, angles[index]),
            Self::Crop(params) => {
                let (x, y) = params.offsets()[index];
                if img.width() != params.source_size() || img.height() != params.source_size() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{0}x{0}", params.source_size()),
                        actual: format!("{}x{}", img.width(), img.height()),
                    });
                }
                img.crop(x, y, params.crop_size(), params.crop_size())?
            }
            Self::Jitter(params) => photometric::color_jitter(img, *params),
            Self::Edge => photometric::edge_enhance(img),
            Self::FancyPca { scale, alpha_std } => {
                let basis = photometric::compute_pca_basis(img)?.with_scale(*scale)?;
                let draw = AlphaDraw::sample(rng, *alpha_std);
                photometric::fancy_pca(img, &basis, &draw)
            }
        })
    }

    /// All variants of `img`, in variant order.
    pub fn apply(&self, img: &RawImage, rng: &mut StreamRng) -> Result<Vec<RawImage>> {
        if let Self::Crop(params) = self {
            return Ok(geometric::five_crop(img, *params)?.into());
        }
        (0..self.variant_count()).map(|i| self.variant(img, i, rng)).collect()
    }
}
