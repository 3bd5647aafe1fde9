//! Precision, recall and F1 against hand tallies.

use rand::Rng as _;
use vocoder_fingerprint::eval::metrics::{accuracy, macro_f1, micro_f1};
use vocoder_fingerprint::eval::{confusion, precision_recall_f1, MetricCounts, MetricsReport};
use vocoder_fingerprint::rng;

fn f1_by_hand(tp: f64, fp: f64, fn_: f64) -> (f64, f64, f64) {
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

pub fn worked_two_class_example() {
    // Positive class: two of four positives found, no false alarms.
    let labels = [1, 1, 1, 1, 0, 0, 0, 0];
    let preds = [1, 1, 0, 0, 0, 0, 0, 0];
    let m = confusion(&labels, &preds, 2).unwrap();
    let s = precision_recall_f1(m.counts(1));
    assert_eq!(s.precision, 1.0);
    assert_eq!(s.recall, 0.5);
    assert!((s.f1 - 0.6667).abs() < 5e-5);
    assert_eq!(s.f1, 2.0 / 3.0);
}

pub fn brute_force_tally_oracle_on_random_predictions() {
    let mut r = rng::stream(31, &[]);
    for n_classes in [2, 4, 7] {
        let labels: Vec<usize> = (0..200).map(|_| r.random_range(0..n_classes)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| if r.random_bool(0.6) { l } else { r.random_range(0..n_classes) })
            .collect();
        let m = confusion(&labels, &preds, n_classes).unwrap();
        let mut f1_sum = 0.0;
        let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
        for c in 0..n_classes {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (&l, &p) in labels.iter().zip(&preds) {
                match (l == c, p == c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    _ => {}
                }
            }
            let counts = m.counts(c);
            assert_eq!((counts.tp, counts.fp, counts.fn_), (tp, fp, fn_));
            assert_eq!(counts.tp + counts.fp + counts.fn_ + counts.tn, 200);
            let (p, rc, f) = f1_by_hand(tp as f64, fp as f64, fn_ as f64);
            let s = precision_recall_f1(counts);
            assert!((s.precision - p).abs() < 1e-12 && (s.recall - rc).abs() < 1e-12 && (s.f1 - f).abs() < 1e-12);
            f1_sum += f;
            tp_all += tp as f64;
            fp_all += fp as f64;
            fn_all += fn_ as f64;
        }
        assert!((macro_f1(&m) - f1_sum / n_classes as f64).abs() < 1e-12);
        let micro = f1_by_hand(tp_all, fp_all, fn_all).2;
        let acc = labels.iter().zip(&preds).filter(|(l, p)| l == p).count() as f64 / 200.0;
        assert!((micro_f1(&m) - micro).abs() < 1e-12);
        assert!((micro_f1(&m) - acc).abs() < 1e-12);
        assert_eq!(accuracy(&m), acc);

        let names: Vec<String> = (0..n_classes).map(|c| format!("c{c}")).collect();
        let report = MetricsReport::from_confusion(&names, m.clone()).unwrap();
        assert!((report.micro_f1 - report.accuracy).abs() < 1e-12);
    }
}

pub fn zero_denominator_conventions() {
    let none = precision_recall_f1(MetricCounts { tp: 0, fp: 0, fn_: 0, tn: 9 });
    assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    let never_predicted = precision_recall_f1(MetricCounts { tp: 0, fp: 0, fn_: 3, tn: 1 });
    assert_eq!((never_predicted.precision, never_predicted.recall, never_predicted.f1), (0.0, 0.0, 0.0));
    let all_wrong = precision_recall_f1(MetricCounts { tp: 0, fp: 4, fn_: 0, tn: 0 });
    assert_eq!((all_wrong.precision, all_wrong.recall, all_wrong.f1), (0.0, 0.0, 0.0));

    // Class 2 never occurs and is never predicted.
    let m = confusion(&[0, 1, 0, 1], &[0, 1, 1, 1], 3).unwrap();
    assert_eq!(m.support(2), 0);
    assert_eq!(precision_recall_f1(m.counts(2)).f1, 0.0);
    assert!((macro_f1(&m) - (2.0 / 3.0 + 0.8) / 3.0).abs() < 1e-15);
}

/// Every check in the suite, by name.
pub const ALL: &[(&str, fn())] = &[
    ("worked_two_class_example", worked_two_class_example),
    ("brute_force_tally_oracle_on_random_predictions", brute_force_tally_oracle_on_random_predictions),
    ("zero_denominator_conventions", zero_denominator_conventions),
];
