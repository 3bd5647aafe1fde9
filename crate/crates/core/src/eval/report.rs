//! `report-v1` text serialization of evaluation results.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{accuracy, macro_f1, micro_f1, precision_recall_f1, ConfusionMatrix};
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "report-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub classes: Vec<ClassScores>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub n_utterances: u64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(class_names: &[String], confusion: ConfusionMatrix) -> Result<Self> {
        if class_names.len() != confusion.n_classes() {
            return Err(Error::Config(format!(
                "{} class names for a {}-class confusion matrix",
                class_names.len(),
                confusion.n_classes()
            )));
        }
        let classes = class_names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let s = precision_recall_f1(confusion.counts(c));
                ClassScores {
                    name: name.clone(),
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                    support: confusion.support(c),
                }
            })
            .collect();
        Ok(MetricsReport {
            classes,
            macro_f1: macro_f1(&confusion),
            micro_f1: micro_f1(&confusion),
            accuracy: accuracy(&confusion),
            n_utterances: confusion.total(),
            confusion,
        })
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Floats use Rust's shortest round-trip formatting, so parsing the
    /// text restores every value exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let names = self.class_names().join(",");
        writeln!(s, "{REPORT_HEADER}").unwrap();
        writeln!(s, "n_utterances: {}", self.n_utterances).unwrap();
        writeln!(s, "classes: {names}").unwrap();
        writeln!(s, "macro_f1: {}", self.macro_f1).unwrap();
        writeln!(s, "micro_f1: {}", self.micro_f1).unwrap();
        writeln!(s, "accuracy: {}", self.accuracy).unwrap();
        for c in &self.classes {
            writeln!(s, "class: {}", c.name).unwrap();
            writeln!(s, "  precision: {}", c.precision).unwrap();
            writeln!(s, "  recall: {}", c.recall).unwrap();
            writeln!(s, "  f1: {}", c.f1).unwrap();
            writeln!(s, "  support: {}", c.support).unwrap();
        }
        writeln!(s, "confusion:").unwrap();
        for t in 0..self.confusion.n_classes() {
            let row: Vec<String> = self.confusion.row(t).iter().map(u64::to_string).collect();
            writeln!(s, "  {}", row.join(" ")).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("report: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_HEADER) {
            return Err(bad(format!("missing `{REPORT_HEADER}` header")));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            line.trim_start()
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(format!("expected `{key}:`, found `{line}`")))
        };
        fn num<T: std::str::FromStr>(v: String, key: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Format(format!("report: bad value `{v}` for `{key}`")))
        }
        let n_utterances = num(field("n_utterances")?, "n_utterances")?;
        let names: Vec<String> = field("classes")?.split(',').map(str::to_string).collect();
        let macro_f1 = num(field("macro_f1")?, "macro_f1")?;
        let micro_f1 = num(field("micro_f1")?, "micro_f1")?;
        let accuracy = num(field("accuracy")?, "accuracy")?;
        let mut classes = Vec::with_capacity(names.len());
        for expected in &names {
            let name = field("class")?;
            if &name != expected {
                return Err(bad(format!("class block `{name}` out of order, expected `{expected}`")));
            }
            classes.push(ClassScores {
                name,
                precision: num(field("precision")?, "precision")?,
                recall: num(field("recall")?, "recall")?,
                f1: num(field("f1")?, "f1")?,
                support: num(field("support")?, "support")?,
            });
        }
        field("confusion")?;
        let k = names.len();
        let mut cells = Vec::with_capacity(k * k);
        for _ in 0..k {
            let line = lines.next().ok_or_else(|| bad("truncated confusion matrix".into()))?;
            let row: Vec<u64> = line
                .split_whitespace()
                .map(|v| num(v.to_string(), "confusion"))
                .collect::<Result<_>>()?;
            if row.len() != k {
                return Err(bad(format!("confusion row `{line}` has {} cells, expected {k}", row.len())));
            }
            cells.extend(row);
        }
        Ok(MetricsReport {
            classes,
            macro_f1,
            micro_f1,
            accuracy,
            n_utterances,
            confusion: ConfusionMatrix::from_counts(k, cells)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::confusion;
    use proptest::prelude::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn report_layout() {
        let m = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        let r = MetricsReport::from_confusion(&names(2), m).unwrap();
        let text = r.to_text();
        assert!(text.starts_with("report-v1\nn_utterances: 4\nclasses: c0,c1\n"));
        assert!(text.ends_with("confusion:\n  1 1\n  0 2\n"));
        assert_eq!(r.micro_f1, r.accuracy);
    }

    #[test]
    fn rejects_bad_text() {
        assert!(MetricsReport::parse("report-v2\n").is_err());
        let m = confusion(&[0, 1], &[0, 1], 2).unwrap();
        let text = MetricsReport::from_confusion(&names(2), m).unwrap().to_text();
        let cut = &text[..text.len() - 4];
        assert!(matches!(MetricsReport::parse(cut), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            k in 2usize..6,
            pairs in proptest::collection::vec((0usize..6, 0usize..6), 0..120),
        ) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().map(|&(a, b)| (a % k, b % k)).unzip();
            let m = confusion(&t, &p, k).unwrap();
            for c in 0..k {
                prop_assert_eq!(m.support(c), t.iter().filter(|&&x| x == c).count() as u64);
            }
            let r = MetricsReport::from_confusion(&names(k), m).unwrap();
            let back = MetricsReport::parse(&r.to_text()).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert!((r.micro_f1 - r.accuracy).abs() < 1e-12);
            for c in &r.classes {
                prop_assert!((0.0..=1.0).contains(&c.f1));
            }
        }
    }
}
