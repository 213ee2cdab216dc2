//! Top-k scoring, cross-fold aggregation and result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{Category, SchemeKind};

const SUM_TOLERANCE: f64 = 1e-6;

/// Zero-based rank of `label` in `probs`, where higher probability ranks
/// first and equal probabilities rank by lower class index.
pub fn rank_of(probs: &[f64], label: usize) -> usize {
    let p = probs[label];
    probs.iter().enumerate().filter(|&(j, &q)| q > p || (q == p && j < label)).count()
}

/// Fraction of items whose label is among the `k` most probable classes.
pub fn top_k_accuracy(probabilities: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} distributions vs {} labels", probabilities.len(), labels.len())));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("no items to score".into()));
    }
    let mut hits = 0;
    for (i, (probs, &label)) in probabilities.iter().zip(labels).enumerate() {
        if label >= probs.len() {
            return Err(Error::ShapeMismatch(format!("item {i}: label {label} but {} classes", probs.len())));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::ShapeMismatch(format!("item {i}: probabilities sum to {sum}")));
        }
        if rank_of(probs, label) < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub top1: f64,
    pub top5: f64,
    pub items: usize,
}

impl FoldResult {
    pub fn score(fold: usize, probabilities: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        Ok(Self {
            fold,
            top1: top_k_accuracy(probabilities, labels, 1)?,
            top5: top_k_accuracy(probabilities, labels, 5)?,
            items: labels.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scheme: String,
    pub folds: Vec<FoldResult>,
    pub top1_mean: f64,
    pub top1_std: f64,
    pub top5_mean: f64,
    pub top5_std: f64,
}

impl BenchmarkReport {
    pub fn top1_text(&self) -> String {
        format_mean_std(self.top1_mean, self.top1_std)
    }

    pub fn top5_text(&self) -> String {
        format_mean_std(self.top5_mean, self.top5_std)
    }
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Folds are sorted by index first, so input order does not matter.
pub fn aggregate(scheme: &str, fold_results: &[FoldResult]) -> Result<BenchmarkReport> {
    if fold_results.len() < 2 {
        return Err(Error::InsufficientFolds(fold_results.len()));
    }
    let mut folds = fold_results.to_vec();
    folds.sort_by_key(|f| f.fold);
    let (top1_mean, top1_std) = mean_std(&folds.iter().map(|f| f.top1).collect::<Vec<_>>());
    let (top5_mean, top5_std) = mean_std(&folds.iter().map(|f| f.top5).collect::<Vec<_>>());
    Ok(BenchmarkReport { scheme: scheme.to_string(), folds, top1_mean, top1_std, top5_mean, top5_std })
}

/// Fractions rendered as percentages: `0.6195, 0.0101` -> `61.95 ± 1.01%`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    // Round in the percent domain so 0.6195 does not print as 61.94.
    let pct = |v: f64| (v * 10_000.0).round() / 100.0;
    format!("{:.2} ± {:.2}%", pct(mean), pct(std))
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultRecord {
    Fold { scheme: String, fold: usize, top1: f64, top5: f64, items: usize, wall_seconds: f64 },
    Failed { scheme: String, error: String },
}

impl ResultRecord {
    pub fn scheme(&self) -> &str {
        match self {
            ResultRecord::Fold { scheme, .. } | ResultRecord::Failed { scheme, .. } => scheme,
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

/// Parses JSON lines, skipping blank lines. Errors name the 1-based line.
pub fn parse_results(text: &str) -> Result<Vec<ResultRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeOutcome {
    Report(BenchmarkReport),
    Failed { scheme: String, error: String },
}

impl SchemeOutcome {
    pub fn scheme(&self) -> &str {
        match self {
            SchemeOutcome::Report(r) => &r.scheme,
            SchemeOutcome::Failed { scheme, .. } => scheme,
        }
    }
}

/// Groups records per scheme in first-appearance order. A scheme with any
/// failure record, or fewer than two folds, becomes `Failed`.
pub fn summarize(records: &[ResultRecord]) -> Vec<SchemeOutcome> {
    let mut order: Vec<&str> = Vec::new();
    let mut folds: BTreeMap<&str, Vec<FoldResult>> = BTreeMap::new();
    let mut failures: BTreeMap<&str, String> = BTreeMap::new();
    for r in records {
        let scheme = r.scheme();
        if !order.contains(&scheme) {
            order.push(scheme);
        }
        match r {
            ResultRecord::Fold { fold, top1, top5, items, .. } => {
                folds.entry(scheme).or_default().push(FoldResult { fold: *fold, top1: *top1, top5: *top5, items: *items });
            }
            ResultRecord::Failed { error, .. } => {
                failures.entry(scheme).or_insert_with(|| error.clone());
            }
        }
    }
    order
        .into_iter()
        .map(|scheme| {
            if let Some(error) = failures.get(scheme) {
                return SchemeOutcome::Failed { scheme: scheme.to_string(), error: error.clone() };
            }
            match aggregate(scheme, folds.get(scheme).map(Vec::as_slice).unwrap_or(&[])) {
                Ok(report) => SchemeOutcome::Report(report),
                Err(e) => SchemeOutcome::Failed { scheme: scheme.to_string(), error: e.to_string() },
            }
        })
        .collect()
}

/// One JSON object per scheme.
pub fn reports_to_json_lines(outcomes: &[SchemeOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let value = match o {
            SchemeOutcome::Report(r) => serde_json::json!({
                "scheme": r.scheme,
                "folds": r.folds.len(),
                "top1_mean": r.top1_mean,
                "top1_std": r.top1_std,
                "top5_mean": r.top5_mean,
                "top5_std": r.top5_std,
                "top1": r.top1_text(),
                "top5": r.top5_text(),
            }),
            SchemeOutcome::Failed { scheme, error } => serde_json::json!({ "scheme": scheme, "failed": error }),
        };
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}

/// Text table with Top-1 and Top-5 columns. Within the geometric and
/// photometric groups the best mean of each column is marked with `*`.
pub fn render_table(outcomes: &[SchemeOutcome]) -> String {
    if outcomes.is_empty() {
        return "no results\n".to_string();
    }
    let kind = |s: &str| s.parse::<SchemeKind>().ok();
    let category = |s: &str| kind(s).map(SchemeKind::category);
    let best = |cat: Category, metric: fn(&BenchmarkReport) -> f64| {
        outcomes
            .iter()
            .filter_map(|o| match o {
                SchemeOutcome::Report(r) if category(&r.scheme) == Some(cat) => Some(metric(r)),
                _ => None,
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let marks: Vec<(Category, f64, f64)> = [Category::Geometric, Category::Photometric]
        .into_iter()
        .map(|c| (c, best(c, |r| r.top1_mean), best(c, |r| r.top5_mean)))
        .collect();

    let rows: Vec<[String; 3]> = outcomes
        .iter()
        .map(|o| {
            let name = kind(o.scheme()).map_or_else(|| o.scheme().to_string(), |k| k.title().to_string());
            match o {
                SchemeOutcome::Report(r) => {
                    let m = marks.iter().find(|(c, ..)| Some(*c) == category(&r.scheme));
                    let star = |hit: bool| if hit { " *" } else { "" };
                    let t1 = format!("{}{}", r.top1_text(), star(m.is_some_and(|m| r.top1_mean == m.1)));
                    let t5 = format!("{}{}", r.top5_text(), star(m.is_some_and(|m| r.top5_mean == m.2)));
                    [name, t1, t5]
                }
                SchemeOutcome::Failed { error, .. } => [name, format!("failed: {error}"), String::new()],
            }
        })
        .collect();

    let header = [String::new(), "Top-1 Accuracy".to_string(), "Top-5 Accuracy".to_string()];
    let widths: Vec<usize> = (0..3).map(|c| rows.iter().chain([&header]).map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let rule = "-".repeat(widths.iter().sum::<usize>() + 6);
    let mut out = String::new();
    for (i, r) in [&header].into_iter().chain(&rows).enumerate() {
        let cell = |c: usize| format!("{}{}", r[c], " ".repeat(widths[c] - r[c].chars().count()));
        let _ = writeln!(out, "{}", format!("{}   {}   {}", cell(0), cell(1), cell(2)).trim_end());
        if i == 0 {
            let _ = writeln!(out, "{rule}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn onehot_ish(n: usize, order: &[usize]) -> Vec<f64> {
        // probabilities strictly decreasing along `order`
        let mut p = vec![0.0; n];
        let total: f64 = (1..=n).map(|v| v as f64).sum();
        for (rank, &c) in order.iter().enumerate() {
            p[c] = (n - rank) as f64 / total;
        }
        p
    }

    #[test]
    fn k_equal_class_count_is_perfect() {
        let probs = vec![onehot_ish(4, &[0, 1, 2, 3]), onehot_ish(4, &[3, 2, 1, 0])];
        assert_eq!(top_k_accuracy(&probs, &[3, 0], 4).unwrap(), 1.0);
    }

    #[test]
    fn two_items_one_correct() {
        let probs = vec![vec![0.7, 0.3], vec![0.6, 0.4]];
        assert_eq!(top_k_accuracy(&probs, &[0, 1], 1).unwrap(), 0.5);
    }

    #[test]
    fn hand_counted_top5_fixture() {
        // 6 classes; zero-based rank of the label noted per item.
        let probs = vec![
            vec![0.30, 0.25, 0.20, 0.15, 0.07, 0.03], // label 5: rank 5
            vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.25], // label 3: classes 4, 5 above -> rank 2
            vec![0.50, 0.10, 0.10, 0.10, 0.10, 0.10], // label 5: 0 above, ties 1..4 first -> rank 5
            vec![0.10, 0.10, 0.10, 0.10, 0.10, 0.50], // label 5: rank 0
        ];
        let labels = [5, 3, 5, 5];
        let expected = [0.25, 0.25, 0.5, 0.5, 0.5, 1.0];
        for (k, want) in (1..=6).zip(expected) {
            assert_eq!(top_k_accuracy(&probs, &labels, k).unwrap(), want, "k = {k}");
        }
    }

    #[test]
    fn uniform_ties_break_by_index() {
        let u = vec![1.0 / 6.0; 6];
        let probs = vec![u.clone(); 6];
        let labels: Vec<usize> = (0..6).collect();
        for k in 1..=6 {
            assert!((top_k_accuracy(&probs, &labels, k).unwrap() - k as f64 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scoring_errors() {
        assert!(matches!(top_k_accuracy(&[vec![0.5, 0.5]], &[0, 1], 1), Err(Error::ShapeMismatch(_))));
        assert!(matches!(top_k_accuracy(&[vec![0.5, 0.6]], &[0], 1), Err(Error::ShapeMismatch(_))));
        assert!(matches!(top_k_accuracy(&[vec![1.0]], &[3], 1), Err(Error::ShapeMismatch(_))));
        assert!(top_k_accuracy(&[vec![1.0]], &[0], 0).is_err());
    }

    fn folds(values: &[f64]) -> Vec<FoldResult> {
        values.iter().enumerate().map(|(i, &v)| FoldResult { fold: i, top1: v, top5: v, items: 10 }).collect()
    }

    #[test]
    fn aggregate_examples() {
        let r = aggregate("none", &folds(&[0.5; 4])).unwrap();
        assert_eq!((r.top1_mean, r.top1_std), (0.5, 0.0));
        let r = aggregate("none", &folds(&[0.4, 0.6])).unwrap();
        assert!((r.top1_mean - 0.5).abs() < 1e-15);
        assert!((r.top1_std - 0.02f64.sqrt()).abs() < 1e-12);
        assert!(matches!(aggregate("none", &folds(&[0.4])), Err(Error::InsufficientFolds(1))));
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_mean_std(0.6195, 0.0101), "61.95 ± 1.01%");
        assert_eq!(format_mean_std(0.5, 0.0), "50.00 ± 0.00%");
    }

    #[test]
    fn results_round_trip_and_parse_errors() {
        let recs = vec![
            ResultRecord::Fold { scheme: "crop".into(), fold: 0, top1: 0.5, top5: 0.75, items: 8, wall_seconds: 0.0 },
            ResultRecord::Failed { scheme: "edge".into(), error: "boom".into() },
        ];
        let text: String = recs.iter().map(ResultRecord::to_json_line).collect();
        assert_eq!(parse_results(&text).unwrap(), recs);
        let bad = format!("{text}\n{{not json\n");
        match parse_results(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_marks_best_per_category() {
        let mk = |s: &str, v: f64| SchemeOutcome::Report(aggregate(s, &folds(&[v, v + 0.02])).unwrap());
        let outcomes = vec![
            mk("none", 0.40),
            mk("flip", 0.45),
            mk("crop", 0.60),
            mk("jitter", 0.50),
            SchemeOutcome::Failed { scheme: "edge".into(), error: "diverged".into() },
        ];
        let table = render_table(&outcomes);
        let line = |name: &str| table.lines().find(|l| l.starts_with(name)).unwrap().to_string();
        assert_eq!(line("Cropping").matches('*').count(), 2);
        assert_eq!(line("Color Jittering").matches('*').count(), 2);
        assert!(!line("Flipping").contains('*'));
        assert!(!line("Baseline").contains('*'));
        assert!(line("Edge Enhancement").contains("failed: diverged"));
        assert_eq!(table.lines().count(), 7);
        assert_eq!(render_table(&[]), "no results\n");
    }

    #[test]
    fn summarize_groups_and_flags_failures() {
        let mut recs: Vec<ResultRecord> = (0..4)
            .map(|f| ResultRecord::Fold { scheme: "none".into(), fold: f, top1: 0.5, top5: 0.5, items: 4, wall_seconds: 1.0 })
            .collect();
        recs.push(ResultRecord::Fold { scheme: "crop".into(), fold: 0, top1: 0.5, top5: 0.5, items: 4, wall_seconds: 1.0 });
        recs.push(ResultRecord::Failed { scheme: "crop".into(), error: "bad".into() });
        let out = summarize(&recs);
        assert_eq!(out.len(), 2);
        assert!(matches!(&out[0], SchemeOutcome::Report(r) if r.folds.len() == 4));
        assert!(matches!(&out[1], SchemeOutcome::Failed { error, .. } if error == "bad"));
        let json = reports_to_json_lines(&out);
        assert_eq!(json.lines().count(), 2);
        assert!(json.contains("\"top1\":\"50.00 ± 0.00%\""));
    }

    fn distributions() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (2usize..8, 1usize..12).prop_flat_map(|(classes, items)| {
            (
                prop::collection::vec(prop::collection::vec(0.01f64..1.0, classes), items),
                prop::collection::vec(0..classes, items),
            )
                .prop_map(|(raw, labels)| {
                    let probs = raw
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            r.into_iter().map(|v| v / s).collect()
                        })
                        .collect();
                    (probs, labels)
                })
        })
    }

    proptest! {
        #[test]
        fn top_k_monotone_in_k((probs, labels) in distributions()) {
            let classes = probs[0].len();
            let mut prev = 0.0;
            for k in 1..=classes {
                let acc = top_k_accuracy(&probs, &labels, k).unwrap();
                prop_assert!(acc >= prev);
                prev = acc;
            }
            prop_assert_eq!(prev, 1.0);
        }

        #[test]
        fn top_k_ignores_item_order((probs, labels) in distributions(), rot in 0usize..12) {
            let n = labels.len();
            let r = rot % n;
            let mut p2 = probs.clone();
            let mut l2 = labels.clone();
            p2.rotate_left(r);
            l2.rotate_left(r);
            for k in [1, 2, 5] {
                prop_assert_eq!(top_k_accuracy(&probs, &labels, k).unwrap(), top_k_accuracy(&p2, &l2, k).unwrap());
            }
        }

        #[test]
        fn aggregate_ignores_fold_order(values in prop::collection::vec(0.0f64..1.0, 2..6), rot in 0usize..6) {
            let f = folds(&values);
            let mut g = f.clone();
            g.rotate_left(rot % f.len());
            prop_assert_eq!(aggregate("x", &f).unwrap(), aggregate("x", &g).unwrap());
        }
    }
}
