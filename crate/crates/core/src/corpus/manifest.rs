//! Line-delimited utterance manifest.
//!
//! ```text
//! #manifest-v1
//! #classes: identity,griffin_lim
//! u00000_identity	audio/identity/u00000_identity.wav	identity	spk000	train	1.250000
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_MAGIC: &str = "#manifest-v1";
const CLASSES_PREFIX: &str = "#classes:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
    /// Written by corpus generation before `split_manifest` runs.
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unassigned => "none",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::Unassigned),
            other => Err(Error::Format(format!("unknown split `{other}`"))),
        }
    }
}

/// A class label: dense index into the manifest's class list plus its name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VocoderClass {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub label: usize,
    pub speaker_id: String,
    pub split: Split,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    classes: Vec<String>,
    records: Vec<UtteranceRecord>,
}

fn valid_field(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\t', '\n', '\r'])
}

impl Manifest {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !valid_field(c) || c.contains(',') {
                return Err(Error::Config(format!("invalid class name `{c}`")));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Config(format!("duplicate class name `{c}`")));
            }
        }
        Ok(Manifest {
            classes,
            records: Vec::new(),
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, index: usize) -> Option<VocoderClass> {
        self.classes.get(index).map(|name| VocoderClass {
            index,
            name: name.clone(),
        })
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [UtteranceRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: UtteranceRecord) -> Result<()> {
        if record.label >= self.classes.len() {
            return Err(Error::Data(format!(
                "utterance {}: label {} outside class list of {}",
                record.id,
                record.label,
                self.classes.len()
            )));
        }
        for (what, field) in [("id", &record.id), ("speaker", &record.speaker_id)] {
            if !valid_field(field) {
                return Err(Error::Data(format!("invalid {what} field `{field}`")));
            }
        }
        if !(record.duration_s > 0.0 && record.duration_s.is_finite()) {
            return Err(Error::Data(format!(
                "utterance {}: duration must be positive",
                record.id
            )));
        }
        if self.records.iter().any(|r| r.id == record.id) {
            return Err(Error::Data(format!("duplicate utterance id `{}`", record.id)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Sorted distinct speaker ids.
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self
            .records
            .iter()
            .map(|r| r.speaker_id.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        s.sort();
        s
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MANIFEST_MAGIC}\n{CLASSES_PREFIX} {}\n",
            self.classes.join(",")
        );
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\n",
                r.id,
                r.path.to_string_lossy(),
                self.classes[r.label],
                r.speaker_id,
                r.split,
                r.duration_s
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == MANIFEST_MAGIC => {}
            _ => {
                return Err(Error::Format(format!(
                    "manifest must start with `{MANIFEST_MAGIC}`"
                )))
            }
        }
        let classes = match lines.next() {
            Some((_, l)) if l.starts_with(CLASSES_PREFIX) => l[CLASSES_PREFIX.len()..]
                .trim()
                .split(',')
                .map(|s| s.trim().to_string())
                .collect::<Vec<_>>(),
            _ => {
                return Err(Error::Format(format!(
                    "manifest line 2 must declare `{CLASSES_PREFIX} ...`"
                )))
            }
        };
        let mut m = Manifest::new(classes).map_err(|e| Error::Format(e.to_string()))?;
        for (lineno, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::Format(format!(
                    "manifest line {}: expected 6 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let label = m.class_index(fields[2]).ok_or_else(|| {
                Error::Format(format!(
                    "manifest line {}: label `{}` not in declared classes",
                    lineno + 1,
                    fields[2]
                ))
            })?;
            let duration_s: f64 = fields[5].parse().map_err(|_| {
                Error::Format(format!(
                    "manifest line {}: bad duration `{}`",
                    lineno + 1,
                    fields[5]
                ))
            })?;
            m.push(UtteranceRecord {
                id: fields[0].to_string(),
                path: PathBuf::from(fields[1]),
                label,
                speaker_id: fields[3].to_string(),
                split: fields[4].parse()?,
                duration_s,
            })
            .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
