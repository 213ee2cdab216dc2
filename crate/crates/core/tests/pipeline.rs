use augbench_core::eval::{parse_results, summarize, ResultRecord, SchemeOutcome};
use augbench_core::nn::{decode_checkpoint, encode_checkpoint, predict};
use augbench_core::pipeline::{prepare, run_benchmark, run_fold};
use augbench_core::synthetic::{write_synthetic_dataset, SyntheticSpec};
use augbench_core::{AugmentationScheme, RunConfig, SchemeKind};

fn tiny_config(root: &std::path::Path) -> RunConfig {
    let spec = SyntheticSpec { classes: 2, per_class: 5, min_side: 24, max_side: 32 };
    write_synthetic_dataset(root, &spec, 9).unwrap();
    let mut config = RunConfig { dataset_root: root.to_path_buf(), seed: 4, record_timing: false, ..Default::default() };
    config.schemes = vec![SchemeKind::None, SchemeKind::Flip];
    config.train.epochs = 1;
    config.train.minibatch = 4;
    config
}

#[test]
fn benchmark_writes_one_record_per_scheme_and_fold() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let data = prepare(&config).unwrap();
    // 5 per class trims to 4
    assert_eq!(data.dataset.len(), 8);

    let mut sink = Vec::new();
    let outcomes = run_benchmark(&config, &data, &mut sink).unwrap();
    let text = String::from_utf8(sink).unwrap();
    let records = parse_results(&text).unwrap();
    assert_eq!(records.len(), 8);
    for r in &records {
        match r {
            ResultRecord::Fold { items, wall_seconds, top5, .. } => {
                assert_eq!(*items, 2);
                assert_eq!(*wall_seconds, 0.0);
                // two classes, so every label is in the top 5
                assert_eq!(*top5, 1.0);
            }
            ResultRecord::Failed { error, .. } => panic!("unexpected failure: {error}"),
        }
    }
    assert_eq!(summarize(&records), outcomes);
    let names: Vec<_> = outcomes
        .iter()
        .map(|o| match o {
            SchemeOutcome::Report(r) => r.scheme.clone(),
            SchemeOutcome::Failed { error, .. } => panic!("{error}"),
        })
        .collect();
    assert_eq!(names, ["none", "flip"]);
}

#[test]
fn trained_model_survives_a_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let data = prepare(&config).unwrap();
    let scheme = AugmentationScheme::new(SchemeKind::Flip, &config.settings).unwrap();
    let mut run = run_fold(&data, &scheme, 2, &config).unwrap();
    assert_eq!(run.trace.epochs.len(), 1);
    assert_eq!(run.result.fold, 2);

    let mut restored = decode_checkpoint(&encode_checkpoint(&run.model)).unwrap();
    let img = &data.dataset.items()[0].image;
    assert_eq!(predict(&mut run.model, img).unwrap(), predict(&mut restored, img).unwrap());
}
