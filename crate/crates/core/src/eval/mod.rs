//! Evaluation: confusion matrix, per-class and aggregate F1, reports and
//! fingerprint export.

pub mod dataset;
pub mod metrics;
pub mod report;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nnet::model::features_to_input;
use crate::nnet::Model;

pub use dataset::LabeledSet;
pub use metrics::{confusion, precision_recall_f1, ConfusionMatrix, MetricCounts, Scores};
pub use report::{ClassScores, MetricsReport};

/// Prediction and fingerprint for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub id: String,
    pub label: usize,
    pub pred: usize,
    pub vector: Vec<f32>,
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Full-length inference on every utterance, in set order.
pub fn infer_set(model: &Model<f32>, set: &LabeledSet) -> Result<Vec<EmbeddingRow>> {
    if set.feature_config.dims() != model.config().input_coeffs {
        return Err(Error::Config(format!(
            "features have {} dims but the model expects {}",
            set.feature_config.dims(),
            model.config().input_coeffs
        )));
    }
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (logits, fp) = model.infer(features_to_input(&[&set.features[i]])?)?;
            Ok(EmbeddingRow {
                id: set.ids[i].clone(),
                label: set.labels[i],
                pred: argmax(logits.data()),
                vector: fp.into_data(),
            })
        })
        .collect()
}

fn check_classes(model_classes: &[String], set: &LabeledSet) -> Result<()> {
    if model_classes != set.class_names {
        return Err(Error::Config(format!(
            "class list mismatch: checkpoint has [{}], manifest has [{}]",
            model_classes.join(","),
            set.class_names.join(",")
        )));
    }
    Ok(())
}

/// Scores `model` on `set`; `class_names` are the checkpoint's classes and
/// must equal the manifest's.
pub fn evaluate(model: &Model<f32>, class_names: &[String], set: &LabeledSet) -> Result<MetricsReport> {
    check_classes(class_names, set)?;
    let rows = infer_set(model, set)?;
    report_from_rows(class_names, &rows)
}

pub fn report_from_rows(class_names: &[String], rows: &[EmbeddingRow]) -> Result<MetricsReport> {
    let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
    let preds: Vec<usize> = rows.iter().map(|r| r.pred).collect();
    MetricsReport::from_confusion(class_names, confusion(&labels, &preds, class_names.len())?)
}

pub fn export_embeddings(model: &Model<f32>, class_names: &[String], set: &LabeledSet) -> Result<Vec<EmbeddingRow>> {
    check_classes(class_names, set)?;
    infer_set(model, set)
}

/// `id<TAB>label<TAB>pred<TAB>v0<TAB>...`, one row per utterance.
pub fn embeddings_to_tsv(rows: &[EmbeddingRow]) -> String {
    let mut s = String::new();
    for r in rows {
        write!(s, "{}\t{}\t{}", r.id, r.label, r.pred).unwrap();
        for v in &r.vector {
            write!(s, "\t{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn parse_embeddings(text: &str) -> Result<Vec<EmbeddingRow>> {
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            let bad = || Error::Format(format!("embedding table line {}: `{line}`", n + 1));
            let mut cols = line.split('\t');
            let id = cols.next().filter(|s| !s.is_empty()).ok_or_else(bad)?.to_string();
            let label = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let pred = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let vector = cols.map(|v| v.parse().map_err(|_| bad())).collect::<Result<Vec<f32>>>()?;
            Ok(EmbeddingRow {
                id,
                label,
                pred,
                vector,
            })
        })
        .collect()
}

pub fn write_embeddings(path: &Path, rows: &[EmbeddingRow]) -> Result<()> {
    std::fs::write(path, embeddings_to_tsv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRow>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    parse_embeddings(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean pairwise distance between class centroids divided by the mean
/// distance of each vector to its own class centroid. Classes are grouped by
/// true label.
pub fn separability(rows: &[EmbeddingRow]) -> Result<f64> {
    let dim = rows.first().map(|r| r.vector.len()).unwrap_or(0);
    if dim == 0 || rows.iter().any(|r| r.vector.len() != dim) {
        return Err(Error::Data("embedding rows are empty or ragged".into()));
    }
    let n_classes = rows.iter().map(|r| r.label).max().unwrap() + 1;
    let mut sums = vec![vec![0.0f64; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for r in rows {
        counts[r.label] += 1;
        for (s, &v) in sums[r.label].iter_mut().zip(&r.vector) {
            *s += v as f64;
        }
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Data("separability needs at least two classes".into()));
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect())
        .collect();
    let mut between = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in present.iter().enumerate() {
        for &b in &present[i + 1..] {
            between += distance(&centroids[a], &centroids[b]);
            pairs += 1;
        }
    }
    let within = rows
        .iter()
        .map(|r| {
            let v: Vec<f64> = r.vector.iter().map(|&x| x as f64).collect();
            distance(&v, &centroids[r.label])
        })
        .sum::<f64>()
        / rows.len() as f64;
    Ok((between / pairs as f64) / within)
}
