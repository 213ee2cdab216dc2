use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
    #[default]
    Xavier,
    /// Zero-mean normal with the given standard deviation.
    Gaussian { std: f64 },
}

/// (fan_in, fan_out) for `[out, in]` dense or `[out, in, kh, kw]` conv weights.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [out, inp] => (*inp, *out),
        [out, inp, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (inp * receptive, out * receptive)
        }
        [n] => (*n, *n),
        [] => (1, 1),
    }
}

pub fn xavier_init<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let (fan_in, fan_out) = fans(shape);
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    t
}

pub fn gaussian_init<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Tensor {
    let normal = Normal::new(0.0, std).expect("valid std");
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = normal.sample(rng);
    }
    t
}

impl WeightInit {
    pub fn weights<R: Rng + ?Sized>(self, shape: &[usize], rng: &mut R) -> Tensor {
        match self {
            WeightInit::Xavier => xavier_init(shape, rng),
            WeightInit::Gaussian { std } => gaussian_init(shape, std, rng),
        }
    }
}
