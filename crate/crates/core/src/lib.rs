//! Image data augmentation schemes, a from-scratch convolutional network and
//! a k-fold benchmark harness that scores each scheme by Top-1/Top-5
//! accuracy.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometric;
pub mod imagecore;
pub mod nn;
pub mod photometric;
pub mod pipeline;
pub mod scheme;
pub mod seeding;
pub mod synthetic;

pub use error::{Error, Result};
pub use imagecore::{NormalizedImage, RawImage};
pub use scheme::{AugmentationScheme, SchemeKind, SchemeSettings};
pub use eval::{BenchmarkReport, FoldResult};
pub use nn::{CnnModel, LayerSpec, Tensor};
pub use pipeline::RunConfig;
