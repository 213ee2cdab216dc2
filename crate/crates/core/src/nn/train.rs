use std::io::Write;

use serde::{Deserialize, Serialize};

use super::model::CnnModel;
use super::optim::{OptimizerConfig, OptimizerState};
use crate::dataset::SampleSource;
use crate::error::{Error, Result};
use crate::imagecore::{normalize, RawImage};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, minibatch: 16, optimizer: OptimizerConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's samples.
    pub loss: f64,
    /// Fraction of samples classified correctly during the epoch's forward passes.
    pub train_top1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    /// One `{"epoch","loss","train_top1"}` object per line.
    pub fn write_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Center-crops or zero-pads `img` to the model's spatial input size and
/// returns normalized CHW values.
pub fn prepare_input(img: &RawImage, input_shape: [usize; 3]) -> Vec<f64> {
    let [_, h, w] = input_shape;
    normalize(&img.center_on_canvas(w, h)).to_chw()
}

/// Class probabilities for one image.
pub fn predict(model: &mut CnnModel, img: &RawImage) -> Result<Vec<f64>> {
    let x = prepare_input(img, model.input_shape());
    model.forward(&x)
}

/// Minibatch SGD with Nesterov momentum. Sample order is reshuffled every
/// epoch from `seed`; the same model, data and seed give a bit-identical
/// result.
pub fn train<S: SampleSource + ?Sized>(model: &mut CnnModel, data: &S, config: &TrainConfig, seed: u64) -> Result<TrainTrace> {
    if config.minibatch == 0 {
        return Err(Error::InvalidArgument("minibatch must be at least 1".into()));
    }
    let mut state = OptimizerState::new(model, config.optimizer)?;
    let mut trace = TrainTrace::default();
    if config.epochs == 0 {
        return Ok(trace);
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    let input_shape = model.input_shape();
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        seeding::shuffle(&mut order, &mut seeding::stream(seed, &[seeding::hash_str("epoch"), epoch as u64]));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch_no, batch) in order.chunks(config.minibatch).enumerate() {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let (img, label) = data.sample(i)?;
                inputs.push(prepare_input(&img, input_shape));
                labels.push(label);
            }
            let context = |e: Error| match e {
                Error::NumericalFailure(msg) => Error::NumericalFailure(format!("epoch {epoch}, batch {batch_no}: {msg}")),
                other => other,
            };
            let (outcome, mut grads) = model.batch_gradients(&inputs, &labels, config.optimizer.l2).map_err(context)?;
            state.step(model, &mut grads)?;
            loss_sum += outcome.loss * batch.len() as f64;
            correct += outcome.correct;
        }
        let stats = EpochStats { epoch, loss: loss_sum / data.len() as f64, train_top1: correct as f64 / data.len() as f64 };
        log::debug!("epoch {epoch}: loss {:.4}, train top-1 {:.3}", stats.loss, stats.train_top1);
        trace.epochs.push(stats);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabeledImage, Provenance};
    use crate::nn::{LayerSpec, WeightInit};
    use crate::seeding::stream;

    fn stripes(vertical: bool, phase: usize) -> RawImage {
        RawImage::from_fn(8, 8, |x, y| {
            let t = if vertical { x } else { y };
            if (t + phase) % 4 < 2 { [230, 230, 230] } else { [20, 20, 20] }
        })
    }

    fn fixture() -> Vec<LabeledImage> {
        (0..8)
            .map(|i| LabeledImage {
                image: stripes(i % 2 == 0, i / 2),
                label: i % 2,
                source_id: format!("s{i}"),
                provenance: Provenance::Original,
            })
            .collect()
    }

    fn small_model(seed: u64) -> CnnModel {
        let specs = [
            LayerSpec::Conv { out_channels: 4, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::Relu,
            LayerSpec::MaxPool { kernel: 2, stride: 2 },
            LayerSpec::Softmax { units: 2 },
        ];
        CnnModel::new([3, 8, 8], &specs, WeightInit::Xavier, &mut stream(seed, &[])).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_model_untouched() {
        let mut model = small_model(1);
        let before = model.clone();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let trace = train(&mut model, fixture().as_slice(), &cfg, 3).unwrap();
        assert!(trace.epochs.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let cfg = TrainConfig { epochs: 20, minibatch: 4, ..Default::default() };
        let data = fixture();
        let mut a = small_model(2);
        let mut b = small_model(2);
        let ta = train(&mut a, &data, &cfg, 9).unwrap();
        let tb = train(&mut b, &data, &cfg, 9).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert!(ta.epochs.last().unwrap().loss < ta.epochs[0].loss);
    }

    #[test]
    fn trace_json_lines() {
        let trace = TrainTrace { epochs: vec![EpochStats { epoch: 1, loss: 0.5, train_top1: 0.25 }] };
        let mut buf = Vec::new();
        trace.write_json_lines(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"epoch\":1,\"loss\":0.5,\"train_top1\":0.25}\n");
    }

    #[test]
    fn prepare_input_center_crops() {
        let img = RawImage::from_fn(4, 4, |x, y| [(x * 60) as u8, (y * 60) as u8, 0]);
        let x = prepare_input(&img, [3, 2, 2]);
        // crop window starts at (1, 1)
        assert_eq!(x[0], 60.0 / 255.0);
        assert_eq!(x[4], 60.0 / 255.0);
        assert_eq!(x.len(), 12);
    }

    #[test]
    fn numerical_failure_reports_context() {
        let mut model = small_model(0);
        for p in model.params_mut() {
            p.weights.data_mut()[0] = f64::NAN;
        }
        let cfg = TrainConfig { epochs: 1, minibatch: 4, ..Default::default() };
        match train(&mut model, fixture().as_slice(), &cfg, 0) {
            Err(Error::NumericalFailure(msg)) => assert!(msg.starts_with("epoch 1, batch 0"), "{msg}"),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }
}
