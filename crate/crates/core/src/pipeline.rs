//! End-to-end benchmark: ingest, trim, fold, then for every scheme and fold
//! train on the inflated training folds and score the held-out fold.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, IngestOptions, InflatedView, LabeledDataset, DEFAULT_EXCLUDED_CLASS, FOLD_COUNT};
use crate::error::{Error, Result};
use crate::eval::{summarize, FoldResult, ResultRecord, SchemeOutcome};
use crate::nn::{predict, train, CnnModel, TrainConfig, TrainTrace, WeightInit};
use crate::scheme::{AugmentationScheme, SchemeKind, SchemeSettings};
use crate::seeding::{self, hash_str};

pub const RESULTS_FILE: &str = "results.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    pub schemes: Vec<SchemeKind>,
    pub seed: u64,
    pub train: TrainConfig,
    pub init: WeightInit,
    pub excluded_classes: Vec<String>,
    pub max_classes: Option<usize>,
    pub max_per_class: Option<usize>,
    pub settings: SchemeSettings,
    /// When false, `wall_seconds` is written as 0 so repeated runs produce
    /// byte-identical results files.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::new(),
            output_dir: PathBuf::from("results"),
            schemes: SchemeKind::ALL.to_vec(),
            seed: 0,
            train: TrainConfig::default(),
            init: WeightInit::Xavier,
            excluded_classes: vec![DEFAULT_EXCLUDED_CLASS.to_string()],
            max_classes: None,
            max_per_class: None,
            settings: SchemeSettings::default(),
            record_timing: true,
        }
    }
}

impl RunConfig {
    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            excluded_classes: self.excluded_classes.clone(),
            max_classes: self.max_classes,
            max_per_class: self.max_per_class,
        }
    }

    pub fn folds(&self) -> usize {
        FOLD_COUNT
    }
}

/// Ingested, trimmed and fold-assigned data shared by every scheme.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: LabeledDataset,
    pub split: dataset::FoldSplit,
    pub skipped: usize,
}

pub fn prepare(config: &RunConfig) -> Result<PreparedData> {
    let ingested = dataset::ingest_with(&config.dataset_root, &config.ingest_options())?;
    let dataset = dataset::trim_to_multiple(&ingested.dataset, FOLD_COUNT, config.seed)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(format!("no class has at least {FOLD_COUNT} images")));
    }
    let split = dataset::make_folds(&dataset, config.seed)?;
    log::info!(
        "{} classes, {} images after trimming ({} unreadable files skipped)",
        dataset.classes().len(),
        dataset.len(),
        ingested.skipped.len()
    );
    Ok(PreparedData { dataset, split, skipped: ingested.skipped.len() })
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub result: FoldResult,
    pub trace: TrainTrace,
    pub model: CnnModel,
}

/// Trains a fresh reference model on every fold but `fold` (inflated by
/// `scheme`) and scores it on `fold`. Initial weights depend only on the
/// seed and the fold, so all schemes start from the same network.
pub fn run_fold(data: &PreparedData, scheme: &AugmentationScheme, fold: usize, config: &RunConfig) -> Result<FoldRun> {
    let items = data.dataset.items();
    let training: Vec<_> = data.split.training_indices(fold).into_iter().map(|i| &items[i]).collect();
    let view = InflatedView::new(training, scheme, config.seed);
    let mut model = CnnModel::reference(
        data.dataset.classes().len(),
        config.init,
        &mut seeding::stream(config.seed, &[hash_str("init"), fold as u64]),
    )?;
    let trace = train(&mut model, &view, &config.train, seeding::derive(config.seed, &[hash_str("train"), fold as u64]))?;

    let validation = data.split.validation_indices(fold);
    let mut probabilities = Vec::with_capacity(validation.len());
    let mut labels = Vec::with_capacity(validation.len());
    for i in validation {
        probabilities.push(predict(&mut model, &items[i].image)?);
        labels.push(items[i].label);
    }
    let result = FoldResult::score(fold, &probabilities, &labels)?;
    Ok(FoldRun { result, trace, model })
}

/// Runs every configured scheme over all folds, writing one JSON line per
/// finished fold to `sink` as soon as it completes. A failing scheme gets a
/// failure line and the run moves on to the next scheme.
pub fn run_benchmark(config: &RunConfig, data: &PreparedData, sink: &mut dyn Write) -> Result<Vec<SchemeOutcome>> {
    if config.schemes.is_empty() {
        return Err(Error::InvalidArgument("no schemes selected".into()));
    }
    let io_err = |e| Error::io(config.output_dir.join(RESULTS_FILE), e);
    let mut records = Vec::new();
    for &kind in &config.schemes {
        let outcome = AugmentationScheme::new(kind, &config.settings).and_then(|scheme| {
            for fold in 0..FOLD_COUNT {
                let started = Instant::now();
                let run = run_fold(data, &scheme, fold, config)?;
                let wall_seconds = if config.record_timing { started.elapsed().as_secs_f64() } else { 0.0 };
                log::info!("{kind} fold {fold}: top-1 {:.4}, top-5 {:.4} ({wall_seconds:.1}s)", run.result.top1, run.result.top5);
                let record = ResultRecord::Fold {
                    scheme: kind.name().to_string(),
                    fold,
                    top1: run.result.top1,
                    top5: run.result.top5,
                    items: run.result.items,
                    wall_seconds,
                };
                sink.write_all(record.to_json_line().as_bytes()).and_then(|_| sink.flush()).map_err(io_err)?;
                records.push(record);
            }
            Ok(())
        });
        if let Err(e) = outcome {
            if matches!(e, Error::Io { .. }) {
                return Err(e);
            }
            log::error!("scheme {kind} failed: {e}");
            let record = ResultRecord::Failed { scheme: kind.name().to_string(), error: e.to_string() };
            sink.write_all(record.to_json_line().as_bytes()).and_then(|_| sink.flush()).map_err(io_err)?;
            records.push(record);
        }
    }
    Ok(summarize(&records))
}
