//! Confusion matrix and one-vs-rest precision, recall and F1.

use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `P = TP/(TP+FP)`, `R = TP/(TP+FN)`, `F1 = 2PR/(P+R)`; a zero denominator
/// yields 0.
pub fn precision_recall_f1(c: MetricCounts) -> Scores {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::Data(format!(
                "confusion matrix for {n_classes} classes needs {} cells, got {}",
                n_classes * n_classes,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.n_classes..(truth + 1) * self.n_classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.row(class).iter().sum()
    }

    pub fn counts(&self, class: usize) -> MetricCounts {
        let tp = self.get(class, class);
        let fn_ = self.support(class) - tp;
        let fp = (0..self.n_classes).map(|t| self.get(t, class)).sum::<u64>() - tp;
        MetricCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    pub fn per_class(&self) -> Vec<MetricCounts> {
        (0..self.n_classes).map(|c| self.counts(c)).collect()
    }
}

pub fn confusion(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::Data(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in labels.iter().zip(predictions) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Data(format!(
                "class index {} out of range for {n_classes} classes",
                t.max(p)
            )));
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(m: &ConfusionMatrix) -> f64 {
    let n = m.n_classes();
    (0..n).map(|c| precision_recall_f1(m.counts(c)).f1).sum::<f64>() / n as f64
}

/// F1 from counts pooled over classes.
pub fn micro_f1(m: &ConfusionMatrix) -> f64 {
    let pooled = m.per_class().iter().fold(MetricCounts::default(), |a, c| MetricCounts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
        tn: a.tn + c.tn,
    });
    precision_recall_f1(pooled).f1
}

pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    match m.total() {
        0 => 0.0,
        t => m.correct() as f64 / t as f64,
    }
}
