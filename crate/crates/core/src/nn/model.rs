use serde::{Deserialize, Serialize};

use super::layers::{self, ConvGeometry};
use super::{Tensor, WeightInit};
use crate::error::{Error, Result};
use crate::seeding::StreamRng;

/// One stage of the network. `Softmax` is the trainable output layer: an
/// affine map to `units` logits followed by softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    MaxPool { kernel: usize, stride: usize },
    Relu,
    Dense { units: usize },
    Softmax { units: usize },
}

impl LayerSpec {
    pub fn is_trainable(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. } | LayerSpec::Softmax { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Conv { out_channels, kernel, stride, .. } => out_channels >= 1 && kernel >= 1 && stride >= 1,
            LayerSpec::MaxPool { kernel, stride } => kernel >= 1 && stride >= 1,
            LayerSpec::Relu => true,
            LayerSpec::Dense { units } | LayerSpec::Softmax { units } => units >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid layer {self:?}")))
        }
    }

    /// Output shape for a `[C, H, W]` input; dense layers yield `[units, 1, 1]`.
    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.validate()?;
        Ok(match *self {
            LayerSpec::Conv { out_channels, kernel, stride, padding } => {
                let g = ConvGeometry::new(input, out_channels, kernel, stride, padding)?;
                [out_channels, g.out_h, g.out_w]
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let [c, h, w] = input;
                [c, layers::pool_output_dim(h, kernel, stride), layers::pool_output_dim(w, kernel, stride)]
            }
            LayerSpec::Relu => input,
            LayerSpec::Dense { units } | LayerSpec::Softmax { units } => [units, 1, 1],
        })
    }

    /// Weight tensor shape for a trainable layer.
    fn weight_shape(&self, input: [usize; 3]) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Conv { out_channels, kernel, .. } => Some(vec![out_channels, input[0], kernel, kernel]),
            LayerSpec::Dense { units } | LayerSpec::Softmax { units } => Some(vec![units, input.iter().product()]),
            _ => None,
        }
    }
}

/// The five trainable layers of the reference network (three convolutions,
/// one fully connected, one softmax) with ReLU after every hidden layer and
/// overlapping 3x3/2 max pooling after the first two convolutions.
pub fn reference_layers(class_count: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { out_channels: 30, kernel: 6, stride: 2, padding: 0 },
        LayerSpec::Relu,
        LayerSpec::MaxPool { kernel: 3, stride: 2 },
        LayerSpec::Conv { out_channels: 40, kernel: 6, stride: 2, padding: 2 },
        LayerSpec::Relu,
        LayerSpec::MaxPool { kernel: 3, stride: 2 },
        LayerSpec::Conv { out_channels: 60, kernel: 3, stride: 1, padding: 0 },
        LayerSpec::Relu,
        LayerSpec::Dense { units: 140 },
        LayerSpec::Relu,
        LayerSpec::Softmax { units: class_count },
    ]
}

/// Input resolution of the reference network.
pub const REFERENCE_INPUT: [usize; 3] = [3, 224, 224];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Params {
    fn zeros_like(&self) -> Self {
        Params { weights: Tensor::zeros(self.weights.shape()), bias: Tensor::zeros(self.bias.shape()) }
    }
}

#[derive(Debug, Clone, Default)]
enum Cache {
    #[default]
    Empty,
    Cols(Vec<f64>),
    Input(Vec<f64>),
    Argmax(Vec<usize>),
    Output(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Layer {
    spec: LayerSpec,
    input_shape: [usize; 3],
    output_shape: [usize; 3],
    params: Option<Params>,
    cache: Cache,
}

/// Per-trainable-layer gradients, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Params>,
}

impl Gradients {
    pub fn squared_norm(&self) -> f64 {
        self.layers.iter().map(|p| p.weights.squared_norm() + p.bias.squared_norm()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for p in &mut self.layers {
            p.weights.data_mut().iter_mut().for_each(|g| *g *= factor);
            p.bias.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, p) in self.layers.iter().enumerate() {
            p.weights.check_finite(&format!("weight gradient of trainable layer {i}"))?;
            p.bias.check_finite(&format!("bias gradient of trainable layer {i}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOutcome {
    /// Mean cross-entropy over the batch (without the L2 term).
    pub loss: f64,
    pub correct: usize,
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    input_shape: [usize; 3],
    class_count: usize,
    layers: Vec<Layer>,
}

impl PartialEq for CnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.class_count == other.class_count
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.spec == b.spec && a.params == b.params)
    }
}

impl CnnModel {
    /// Builds a network whose last layer must be `Softmax`. Weights come
    /// from `init`; biases start at zero.
    pub fn new(input_shape: [usize; 3], specs: &[LayerSpec], init: WeightInit, rng: &mut StreamRng) -> Result<Self> {
        let class_count = match specs.last() {
            Some(LayerSpec::Softmax { units }) => *units,
            _ => return Err(Error::InvalidArgument("the last layer must be softmax".into())),
        };
        if specs[..specs.len() - 1].iter().any(|s| matches!(s, LayerSpec::Softmax { .. })) {
            return Err(Error::InvalidArgument("softmax is only allowed as the last layer".into()));
        }
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let output_shape = spec.output_shape(shape)?;
            let params = spec.weight_shape(shape).map(|ws| Params {
                bias: Tensor::zeros(&[ws[0]]),
                weights: init.weights(&ws, rng),
            });
            layers.push(Layer { spec: *spec, input_shape: shape, output_shape, params, cache: Cache::Empty });
            shape = output_shape;
        }
        Ok(Self { input_shape, class_count, layers })
    }

    pub fn reference(class_count: usize, init: WeightInit, rng: &mut StreamRng) -> Result<Self> {
        Self::new(REFERENCE_INPUT, &reference_layers(class_count), init, rng)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Output shape of every layer, in order.
    pub fn shape_chain(&self) -> Vec<[usize; 3]> {
        self.layers.iter().map(|l| l.output_shape).collect()
    }

    pub fn params(&self) -> impl Iterator<Item = &Params> {
        self.layers.iter().filter_map(|l| l.params.as_ref())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Params> {
        self.layers.iter_mut().filter_map(|l| l.params.as_mut())
    }

    pub fn parameter_count(&self) -> usize {
        self.params().map(|p| p.weights.len() + p.bias.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { layers: self.params().map(Params::zeros_like).collect() }
    }

    /// Forward pass of one `[C, H, W]` sample, caching what backward needs.
    /// Returns class probabilities.
    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let expected: usize = self.input_shape.iter().product();
        if input.len() != expected {
            return Err(Error::ShapeMismatch(format!("model expects {:?} ({expected} values), got {}", self.input_shape, input.len())));
        }
        let mut x = input.to_vec();
        for layer in &mut self.layers {
            x = layer.forward(x);
        }
        Ok(x)
    }

    /// Backpropagates `out_grad` (gradient w.r.t. the softmax logits) through
    /// the cached forward pass, accumulating into `grads`. Returns the
    /// gradient w.r.t. the input when `want_input_grad`.
    pub fn backward(&mut self, logits_grad: Vec<f64>, grads: &mut Gradients, want_input_grad: bool) -> Option<Vec<f64>> {
        let mut slot = grads.layers.len();
        let mut g = logits_grad;
        let last = 0;
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let params_grad = if layer.params.is_some() {
                slot -= 1;
                Some(&mut grads.layers[slot])
            } else {
                None
            };
            let need_input = want_input_grad || i != last;
            g = layer.backward(g, params_grad, need_input)?;
        }
        Some(g)
    }

    /// Mean cross-entropy gradients over a batch plus `l2 * w` on every
    /// weight tensor (biases excluded).
    pub fn batch_gradients(&mut self, inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> Result<(BatchOutcome, Gradients)> {
        if inputs.len() != labels.len() || inputs.is_empty() {
            return Err(Error::ShapeMismatch(format!("{} inputs vs {} labels", inputs.len(), labels.len())));
        }
        let mut grads = self.zero_gradients();
        let scale = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        let mut correct = 0;
        for (x, &label) in inputs.iter().zip(labels) {
            if label >= self.class_count {
                return Err(Error::InvalidArgument(format!("label {label} >= class count {}", self.class_count)));
            }
            let probs = self.forward(x)?;
            loss += layers::cross_entropy(&probs, label);
            if argmax(&probs) == label {
                correct += 1;
            }
            let mut g = layers::softmax_cross_entropy_grad(&probs, label);
            g.iter_mut().for_each(|v| *v *= scale);
            self.backward(g, &mut grads, false);
        }
        if l2 != 0.0 {
            for (g, p) in grads.layers.iter_mut().zip(self.params()) {
                for (gw, &w) in g.weights.data_mut().iter_mut().zip(p.weights.data()) {
                    *gw += l2 * w;
                }
            }
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!("batch loss is {loss}")));
        }
        grads.check_finite()?;
        Ok((BatchOutcome { loss, correct }, grads))
    }

    /// Mean cross-entropy plus `l2 / 2 * |w|^2`, the objective whose gradient
    /// [`batch_gradients`](Self::batch_gradients) returns.
    pub fn objective(&mut self, inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> Result<f64> {
        let mut loss = 0.0;
        for (x, &label) in inputs.iter().zip(labels) {
            loss += layers::cross_entropy(&self.forward(x)?, label);
        }
        let penalty: f64 = self.params().map(|p| p.weights.squared_norm()).sum();
        Ok(loss / inputs.len() as f64 + 0.5 * l2 * penalty)
    }

    /// All-zero model with the given topology.
    pub(crate) fn zeroed(input_shape: [usize; 3], specs: &[LayerSpec]) -> Result<Self> {
        Self::new(input_shape, specs, WeightInit::Gaussian { std: 0.0 }, &mut crate::seeding::stream(0, &[]))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

impl Layer {
    fn forward(&mut self, x: Vec<f64>) -> Vec<f64> {
        match self.spec {
            LayerSpec::Conv { out_channels, kernel, stride, padding } => {
                let g = ConvGeometry::new(self.input_shape, out_channels, kernel, stride, padding).expect("validated at build");
                let mut cols = match std::mem::take(&mut self.cache) {
                    Cache::Cols(c) if c.len() == g.patch_len() * g.positions() => c,
                    _ => vec![0.0; g.patch_len() * g.positions()],
                };
                layers::im2col(&x, &g, &mut cols);
                let p = self.params.as_ref().expect("conv has params");
                let out = layers::conv_forward_cols(&cols, p.weights.data(), p.bias.data(), &g);
                self.cache = Cache::Cols(cols);
                out
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let (out, argmax, _) = layers::maxpool_forward(&x, self.input_shape, kernel, stride);
                self.cache = Cache::Argmax(argmax);
                out
            }
            LayerSpec::Relu => {
                let out = layers::relu(&x);
                self.cache = Cache::Output(out.clone());
                out
            }
            LayerSpec::Dense { .. } => {
                let p = self.params.as_ref().expect("dense has params");
                let out = layers::dense_forward(&x, p.weights.data(), p.bias.data());
                self.cache = Cache::Input(x);
                out
            }
            LayerSpec::Softmax { .. } => {
                let p = self.params.as_ref().expect("softmax has params");
                let logits = layers::dense_forward(&x, p.weights.data(), p.bias.data());
                self.cache = Cache::Input(x);
                layers::softmax(&logits)
            }
        }
    }

    fn backward(&mut self, g: Vec<f64>, grads: Option<&mut Params>, want_input_grad: bool) -> Option<Vec<f64>> {
        match (self.spec, &self.cache) {
            (LayerSpec::Conv { out_channels, kernel, stride, padding }, Cache::Cols(cols)) => {
                let geom = ConvGeometry::new(self.input_shape, out_channels, kernel, stride, padding).expect("validated at build");
                let grads = grads.expect("conv gradient slot");
                let p = self.params.as_ref().expect("conv has params");
                layers::conv_backward_cols(cols, p.weights.data(), &g, &geom, grads.weights.data_mut(), grads.bias.data_mut(), want_input_grad)
            }
            (LayerSpec::MaxPool { .. }, Cache::Argmax(argmax)) => {
                want_input_grad.then(|| layers::maxpool_backward(&g, argmax, self.input_shape.iter().product()))
            }
            (LayerSpec::Relu, Cache::Output(out)) => want_input_grad.then(|| layers::relu_backward(out, &g)),
            (LayerSpec::Dense { .. } | LayerSpec::Softmax { .. }, Cache::Input(input)) => {
                let grads = grads.expect("dense gradient slot");
                let p = self.params.as_ref().expect("dense has params");
                layers::dense_backward(input, p.weights.data(), &g, grads.weights.data_mut(), grads.bias.data_mut(), want_input_grad)
            }
            (spec, _) => panic!("backward through {spec:?} without a cached forward pass"),
        }
    }
}
