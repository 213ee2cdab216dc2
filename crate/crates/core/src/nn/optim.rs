use serde::{Deserialize, Serialize};

use super::model::{CnnModel, Gradients, Params};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight-decay coefficient added to weight gradients as `l2 * w`.
    pub l2: f64,
    /// Rescale the whole gradient to at most this L2 norm. Off by default.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, momentum: 0.9, l2: 5e-4, clip_norm: None }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad optimizer settings {self:?}")));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// One Nesterov momentum update, in place:
/// `v <- mu v - lr g`, `w <- w + mu v - lr g`.
pub fn nesterov_update(weights: &mut [f64], velocity: &mut [f64], grad: &[f64], learning_rate: f64, momentum: f64) {
    for ((w, v), &g) in weights.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = momentum * *v - learning_rate * g;
        *w += momentum * *v - learning_rate * g;
    }
}

/// Velocity buffers mirroring the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    velocity: Vec<Params>,
}

impl OptimizerState {
    pub fn new(model: &CnnModel, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, velocity: model.zero_gradients().layers })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn velocity(&self) -> &[Params] {
        &self.velocity
    }

    /// Applies `grads` (already including the L2 term) to `model`.
    pub fn step(&mut self, model: &mut CnnModel, grads: &mut Gradients) -> Result<()> {
        if grads.layers.len() != self.velocity.len() {
            return Err(Error::ShapeMismatch("gradient layout differs from the optimizer state".into()));
        }
        if let Some(max) = self.config.clip_norm {
            let norm = grads.squared_norm().sqrt();
            if norm > max {
                grads.scale(max / norm);
            }
        }
        let (lr, mu) = (self.config.learning_rate, self.config.momentum);
        for ((p, v), g) in model.params_mut().zip(&mut self.velocity).zip(&grads.layers) {
            nesterov_update(p.weights.data_mut(), v.weights.data_mut(), g.weights.data(), lr, mu);
            nesterov_update(p.bias.data_mut(), v.bias.data_mut(), g.bias.data(), lr, mu);
        }
        Ok(())
    }
}
