//! `augbench`: standardize, augment, split, train and benchmark image
//! datasets laid out as one directory per class.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augbench_core::dataset;
use augbench_core::eval::{parse_results, render_table, reports_to_json_lines, summarize};
use augbench_core::nn::save_checkpoint;
use augbench_core::photometric::JitterParams;
use augbench_core::pipeline::{self, RunConfig, RESULTS_FILE};
use augbench_core::synthetic::{write_synthetic_dataset, SyntheticSpec};
use augbench_core::{AugmentationScheme, Error, SchemeKind};
use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;

#[derive(Parser)]
#[command(name = "augbench", version, about = "Image augmentation benchmark")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedural texture dataset (one directory per class).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        per_class: usize,
        #[arg(long, default_value_t = 96)]
        min_side: usize,
        #[arg(long, default_value_t = 160)]
        max_side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Resize every image to 256x256 (aspect kept, black padding).
    Standardize(DataArgs),
    /// Write the originals plus every augmented variant of one scheme.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        scheme: Option<String>,
        #[command(flatten)]
        aug: AugArgs,
    },
    /// Trim classes to a multiple of 4 and write the fold manifest.
    Split(DataArgs),
    /// Train one fold of one scheme and save the model and its loss trace.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        scheme: Option<String>,
        /// Held-out fold (0-3).
        #[arg(long)]
        fold: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        aug: AugArgs,
    },
    /// Cross-validate every selected scheme and write results.jsonl.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated scheme names; all seven by default.
        #[arg(long, alias = "scheme", value_delimiter = ',')]
        schemes: Vec<String>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        aug: AugArgs,
        /// Write wall_seconds as 0 so identical runs give identical files.
        #[arg(long)]
        no_timing: bool,
    },
    /// Render a results file as a table.
    Report {
        results: PathBuf,
        /// Print one JSON summary object per scheme instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_root: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Class directories to skip (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    exclude_class: Option<Vec<String>>,
    #[arg(long)]
    max_classes: Option<usize>,
    #[arg(long)]
    max_per_class: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Rescale gradients to at most this L2 norm.
    #[arg(long)]
    clip_norm: Option<f64>,
}

#[derive(Args)]
struct AugArgs {
    #[arg(long)]
    jitter_hue: Option<f64>,
    #[arg(long)]
    jitter_saturation: Option<f64>,
    #[arg(long)]
    jitter_brightness: Option<f64>,
    #[arg(long)]
    pca_scale: Option<f64>,
    #[arg(long)]
    alpha_std: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_failure(path: &Path, source: std::io::Error) -> Failure {
    Failure::Core(Error::Io { path: path.to_path_buf(), source })
}

/// Flag value, else config-file value, else `None`.
fn pick<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> CliResult<Option<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => Ok(cfg.get(key)?),
    }
}

fn load_config(path: &Option<PathBuf>) -> CliResult<ConfigFile> {
    Ok(match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    })
}

fn apply_data(run: &mut RunConfig, args: DataArgs, cfg: &ConfigFile) -> CliResult<()> {
    run.dataset_root = pick(args.dataset_root, cfg, "dataset-root")?.ok_or_else(|| Failure::Usage("--dataset-root is required".into()))?;
    if let Some(out) = pick(args.out, cfg, "out")? {
        run.output_dir = out;
    }
    if let Some(seed) = pick(args.seed, cfg, "seed")? {
        run.seed = seed;
    }
    if let Some(ex) = args.exclude_class.or_else(|| cfg.list("exclude-class")) {
        run.excluded_classes = ex;
    }
    run.max_classes = pick(args.max_classes, cfg, "max-classes")?;
    run.max_per_class = pick(args.max_per_class, cfg, "max-per-class")?;
    Ok(())
}

fn apply_train(run: &mut RunConfig, args: TrainArgs, cfg: &ConfigFile) -> CliResult<()> {
    let t = &mut run.train;
    t.epochs = pick(args.epochs, cfg, "epochs")?.unwrap_or(t.epochs);
    t.minibatch = pick(args.minibatch, cfg, "minibatch")?.unwrap_or(t.minibatch);
    let o = &mut t.optimizer;
    o.learning_rate = pick(args.lr, cfg, "lr")?.unwrap_or(o.learning_rate);
    o.momentum = pick(args.momentum, cfg, "momentum")?.unwrap_or(o.momentum);
    o.l2 = pick(args.l2, cfg, "l2")?.unwrap_or(o.l2);
    o.clip_norm = pick(args.clip_norm, cfg, "clip-norm")?.or(o.clip_norm);
    o.validate()?;
    if t.minibatch == 0 {
        return Err(Failure::Usage("--minibatch must be at least 1".into()));
    }
    Ok(())
}

fn apply_aug(run: &mut RunConfig, args: AugArgs, cfg: &ConfigFile) -> CliResult<()> {
    let s = &mut run.settings;
    let j = s.jitter;
    s.jitter = JitterParams::new(
        pick(args.jitter_hue, cfg, "jitter-hue")?.unwrap_or(j.delta_hue()),
        pick(args.jitter_saturation, cfg, "jitter-saturation")?.unwrap_or(j.delta_saturation()),
        pick(args.jitter_brightness, cfg, "jitter-brightness")?.unwrap_or(j.delta_brightness()),
    )?;
    s.pca_scale = pick(args.pca_scale, cfg, "pca-scale")?.unwrap_or(s.pca_scale);
    s.alpha_std = pick(args.alpha_std, cfg, "alpha-std")?.unwrap_or(s.alpha_std);
    Ok(())
}

fn parse_scheme(name: &str) -> CliResult<SchemeKind> {
    name.parse::<SchemeKind>().map_err(|e| Failure::Usage(e.to_string()))
}

fn single_scheme(flag: Option<String>, cfg: &ConfigFile) -> CliResult<SchemeKind> {
    let name = flag.or_else(|| cfg.raw("scheme").map(str::to_string)).ok_or_else(|| Failure::Usage("--scheme is required".into()))?;
    parse_scheme(&name)
}

fn print_counts(counts: &std::collections::BTreeMap<String, usize>) {
    let mut total = 0;
    for (class, n) in counts {
        println!("{class}\t{n}");
        total += n;
    }
    println!("total\t{total}");
}

fn ingest(run: &RunConfig) -> CliResult<dataset::LabeledDataset> {
    let ingested = dataset::ingest_with(&run.dataset_root, &run.ingest_options())?;
    for s in &ingested.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.error);
    }
    Ok(ingested.dataset)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { out, classes, per_class, min_side, max_side, seed } => {
            let spec = SyntheticSpec { classes, per_class, min_side, max_side };
            print_counts(&write_synthetic_dataset(&out, &spec, seed)?);
        }
        Command::Standardize(data) => {
            let cfg = load_config(&data.config)?;
            let mut run = RunConfig::default();
            apply_data(&mut run, data, &cfg)?;
            let ds = ingest(&run)?;
            print_counts(&dataset::write_items(ds.items(), ds.classes(), &run.output_dir)?);
        }
        Command::Augment { data, scheme, aug } => {
            let cfg = load_config(&data.config)?;
            let mut run = RunConfig::default();
            apply_data(&mut run, data, &cfg)?;
            apply_aug(&mut run, aug, &cfg)?;
            let kind = single_scheme(scheme, &cfg)?;
            let scheme = AugmentationScheme::new(kind, &run.settings)?;
            let ds = ingest(&run)?;
            let inflated = dataset::inflate(ds.items(), &scheme, run.seed)?;
            print_counts(&dataset::write_items(&inflated, ds.classes(), &run.output_dir)?);
        }
        Command::Split(data) => {
            let cfg = load_config(&data.config)?;
            let mut run = RunConfig::default();
            apply_data(&mut run, data, &cfg)?;
            let prepared = pipeline::prepare(&run)?;
            std::fs::create_dir_all(&run.output_dir).map_err(|e| io_failure(&run.output_dir, e))?;
            let path = run.output_dir.join("folds.json");
            prepared.split.write_manifest(&prepared.dataset, &path)?;
            for fold in 0..run.folds() {
                println!("fold {fold}\t{}", prepared.split.validation_indices(fold).len());
            }
            println!("manifest\t{}", path.display());
        }
        Command::Train { data, scheme, fold, train, aug } => {
            let cfg = load_config(&data.config)?;
            let mut run = RunConfig::default();
            apply_data(&mut run, data, &cfg)?;
            apply_train(&mut run, train, &cfg)?;
            apply_aug(&mut run, aug, &cfg)?;
            let kind = single_scheme(scheme, &cfg)?;
            let fold = pick(fold, &cfg, "fold")?.unwrap_or(0);
            if fold >= run.folds() {
                return Err(Failure::Usage(format!("--fold must be below {}", run.folds())));
            }
            let scheme = AugmentationScheme::new(kind, &run.settings)?;
            let prepared = pipeline::prepare(&run)?;
            let result = pipeline::run_fold(&prepared, &scheme, fold, &run)?;
            let dir = &run.output_dir;
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            save_checkpoint(&result.model, dir.join("model.ckpt"))?;
            let trace_path = dir.join("trace.jsonl");
            let file = File::create(&trace_path).map_err(|e| io_failure(&trace_path, e))?;
            result.trace.write_json_lines(BufWriter::new(file)).map_err(|e| io_failure(&trace_path, e))?;
            println!("{kind} fold {fold}: top-1 {:.4}, top-5 {:.4} on {} images", result.result.top1, result.result.top5, result.result.items);
        }
        Command::Benchmark { data, schemes, train, aug, no_timing } => {
            let cfg = load_config(&data.config)?;
            let mut run = RunConfig::default();
            apply_data(&mut run, data, &cfg)?;
            apply_train(&mut run, train, &cfg)?;
            apply_aug(&mut run, aug, &cfg)?;
            let names = if schemes.is_empty() { cfg.list("schemes").unwrap_or_default() } else { schemes };
            if !names.is_empty() {
                run.schemes = names.iter().map(|n| parse_scheme(n)).collect::<CliResult<_>>()?;
            }
            run.record_timing = !(no_timing || pick(None, &cfg, "no-timing")?.unwrap_or(false));
            let prepared = pipeline::prepare(&run)?;
            let dir = run.output_dir.clone();
            std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
            let results_path = dir.join(RESULTS_FILE);
            let mut sink = File::create(&results_path).map_err(|e| io_failure(&results_path, e))?;
            let outcomes = pipeline::run_benchmark(&run, &prepared, &mut sink)?;
            let report_path = dir.join("report.jsonl");
            std::fs::write(&report_path, reports_to_json_lines(&outcomes)).map_err(|e| io_failure(&report_path, e))?;
            print!("{}", render_table(&outcomes));
        }
        Command::Report { results, json } => {
            let text = std::fs::read_to_string(&results).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Failure::Core(Error::FileNotFound(results.clone())),
                _ => io_failure(&results, e),
            })?;
            let outcomes = summarize(&parse_results(&text)?);
            if json {
                print!("{}", reports_to_json_lines(&outcomes));
            } else {
                print!("{}", render_table(&outcomes));
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::NumericalFailure(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::NumericalFailure("nan".into())), 3);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 1);
        assert_eq!(exit_code(&Error::EmptyDataset("x".into())), 2);
        assert_eq!(exit_code(&Error::Parse { line: 3, message: "x".into() }), 2);
    }

    #[test]
    fn flags_override_config() {
        let cfg = ConfigFile::parse("epochs = 7\nlr = 0.5\nminibatch = 4\n").unwrap();
        let mut run = RunConfig::default();
        let args = TrainArgs { epochs: Some(2), minibatch: None, lr: None, momentum: None, l2: None, clip_norm: None };
        apply_train(&mut run, args, &cfg).unwrap();
        assert_eq!(run.train.epochs, 2);
        assert_eq!(run.train.minibatch, 4);
        assert_eq!(run.train.optimizer.learning_rate, 0.5);
        assert_eq!(run.train.optimizer.momentum, 0.9);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
