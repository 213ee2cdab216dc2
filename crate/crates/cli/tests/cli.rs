use std::path::Path;
use std::process::{Command, Output};

fn augbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augbench")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, classes: usize, per_class: usize) {
    let o = augbench(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--classes",
        &classes.to_string(),
        "--per-class",
        &per_class.to_string(),
        "--min-side",
        "16",
        "--max-side",
        "24",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn count_files(dir: &Path) -> usize {
    walk(dir).len()
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn augment_writes_originals_plus_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 1, 10);
    for (scheme, expected) in [("none", 10), ("flip", 20), ("crop", 60), ("rotate", 30)] {
        let out = tmp.path().join(scheme);
        let o = augbench(&["augment", "--dataset-root", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--scheme", scheme]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(count_files(&out), expected, "{scheme}");
        assert!(stdout(&o).contains(&format!("total\t{expected}")));
    }
    let crops = walk(&tmp.path().join("crop"));
    assert!(crops.iter().any(|p| p.file_name().unwrap().to_str().unwrap().ends_with("__crop4.ppm")));
}

#[test]
fn standardize_and_split() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 2, 6);
    let out = tmp.path().join("std");
    let o = augbench(&["standardize", "--dataset-root", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = walk(&out);
    assert_eq!(files.len(), 12);
    let img = augbench_core::imagecore::load_image(&files[0]).unwrap();
    assert_eq!((img.width(), img.height()), (256, 256));

    let split = tmp.path().join("split");
    let o = augbench(&["split", "--dataset-root", data.to_str().unwrap(), "--out", split.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // 6 per class trims to 4 per class -> 2 per fold
    for fold in 0..4 {
        assert!(stdout(&o).contains(&format!("fold {fold}\t2")), "{}", stdout(&o));
    }
    let manifest: std::collections::BTreeMap<String, usize> =
        serde_json::from_str(&std::fs::read_to_string(split.join("folds.json")).unwrap()).unwrap();
    assert_eq!(manifest.len(), 8);
}

#[test]
fn benchmark_counts_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 2, 4);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = augbench(&[
            "benchmark",
            "--dataset-root",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--schemes",
            "none,crop",
            "--epochs",
            "1",
            "--minibatch",
            "4",
            "--seed",
            "11",
            "--no-timing",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), std::fs::read_to_string(out.join("results.jsonl")).unwrap(), out)
    };
    let (table, results, out) = run("a");
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(lines.iter().filter(|l| l.contains("\"scheme\":\"none\"")).count(), 4);
    assert!(lines.iter().all(|l| l.contains("\"wall_seconds\":0.0")));
    assert!(table.contains("Baseline") && table.contains("Cropping"));
    assert_eq!(std::fs::read_to_string(out.join("report.jsonl")).unwrap().lines().count(), 2);

    let (_, again, _) = run("b");
    assert_eq!(results, again);

    let o = augbench(&["report", out.join("results.jsonl").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), table);
}

#[test]
fn train_saves_model_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 2, 4);
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, format!("dataset_root = {}\nepochs = 5\nscheme = flip\nminibatch = 2\n", data.display())).unwrap();
    let out = tmp.path().join("train");
    let o = augbench(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--epochs", "2", "--fold", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("flip fold 1:"));
    // the flag wins over the config file
    assert_eq!(std::fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count(), 2);
    let model = augbench_core::nn::load_checkpoint(out.join("model.ckpt")).unwrap();
    assert_eq!(model.class_count(), 2);
}

#[test]
fn report_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = augbench(&["report", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "no results\n");

    let row = |f: usize| format!("{{\"scheme\":\"crop\",\"fold\":{f},\"top1\":0.6,\"top5\":0.8,\"items\":20,\"wall_seconds\":1.5}}\n");
    let one = tmp.path().join("one.jsonl");
    std::fs::write(&one, (0..4).map(row).collect::<String>()).unwrap();
    let o = augbench(&["report", one.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.contains("Cropping") && out.contains("60.00 ± 0.00% *"));

    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, format!("{}{}{{oops\n", row(0), row(1))).unwrap();
    let o = augbench(&["report", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(augbench(&[]).status.code(), Some(1));
    assert_eq!(augbench(&["--help"]).status.code(), Some(0));
    assert_eq!(augbench(&["benchmark", "--epochs", "2"]).status.code(), Some(1));
    let data = tmp.path().join("data");
    synth(&data, 1, 4);
    let o = augbench(&["augment", "--dataset-root", data.to_str().unwrap(), "--out", "x", "--scheme", "blur"]);
    assert_eq!(o.status.code(), Some(1));
    let missing = tmp.path().join("nope");
    let o = augbench(&["split", "--dataset-root", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = augbench(&["report", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
