//! Speaker-disjoint train/dev/test assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::manifest::{Manifest, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, dev, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }
}

impl std::str::FromStr for SplitFractions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad fraction `{p}`")))
            })
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            &[a, b, c] => SplitFractions::new(a, b, c),
            _ => Err(Error::Config(format!(
                "expected three fractions train,dev,test; got `{s}`"
            ))),
        }
    }
}

/// Assigns every speaker's utterances to exactly one split.
///
/// Speakers are shuffled with a seeded generator and then handed, one at a
/// time, to the split furthest below its utterance quota. Once the number of
/// remaining speakers equals the number of still-empty splits, those splits
/// are filled first so each split ends up with at least one speaker.
pub fn split_manifest(m: &Manifest, fractions: SplitFractions, seed: u64) -> Result<Manifest> {
    fractions.validate()?;
    let mut per_speaker: BTreeMap<&str, usize> = BTreeMap::new();
    for r in m.records() {
        *per_speaker.entry(r.speaker_id.as_str()).or_default() += 1;
    }
    if per_speaker.len() < 3 {
        return Err(Error::Config(format!(
            "speaker-disjoint split needs at least 3 speakers, manifest has {}",
            per_speaker.len()
        )));
    }

    let mut speakers: Vec<(&str, usize)> = per_speaker.into_iter().collect();
    speakers.shuffle(&mut rng::stream(seed, &[rng::tag::SPLIT]));

    let total = m.len() as f64;
    let targets = fractions.as_array().map(|f| f * total);
    let mut filled = [0usize; 3];
    let mut n_speakers = [0usize; 3];
    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();

    for (i, &(speaker, count)) in speakers.iter().enumerate() {
        let remaining = speakers.len() - i;
        let empty: Vec<usize> = (0..3).filter(|&k| n_speakers[k] == 0).collect();
        let candidates: Vec<usize> = if remaining <= empty.len() {
            empty
        } else {
            (0..3).collect()
        };
        let k = candidates
            .into_iter()
            .fold(None::<(usize, f64)>, |best, k| {
                let deficit = targets[k] - filled[k] as f64;
                match best {
                    Some((_, d)) if d >= deficit => best,
                    _ => Some((k, deficit)),
                }
            })
            .map(|(k, _)| k)
            .expect("three candidate splits");
        filled[k] += count;
        n_speakers[k] += 1;
        assignment.insert(speaker, Split::ASSIGNED[k]);
    }

    let mut out = m.clone();
    for r in out.records_mut() {
        r.split = assignment[r.speaker_id.as_str()];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::manifest::UtteranceRecord;
    use std::collections::HashSet;
    use std::path::PathBuf;

    fn manifest_with(speaker_sizes: &[usize]) -> Manifest {
        let mut m = Manifest::new(vec!["a".into(), "b".into()]).unwrap();
        let mut n = 0;
        for (s, &size) in speaker_sizes.iter().enumerate() {
            for _ in 0..size {
                m.push(UtteranceRecord {
                    id: format!("u{n}"),
                    path: PathBuf::from(format!("u{n}.wav")),
                    label: n % 2,
                    speaker_id: format!("spk{s:04}"),
                    split: Split::Unassigned,
                    duration_s: 1.0,
                })
                .unwrap();
                n += 1;
            }
        }
        m
    }

    fn speaker_sets(m: &Manifest) -> [HashSet<String>; 3] {
        Split::ASSIGNED.map(|s| m.split_records(s).map(|r| r.speaker_id.clone()).collect())
    }

    #[test]
    fn three_speakers_one_each() {
        let m = manifest_with(&[5, 5, 5]);
        let third = 1.0 / 3.0;
        let out = split_manifest(&m, SplitFractions::new(third, third, 1.0 - 2.0 * third).unwrap(), 3)
            .unwrap();
        for set in speaker_sets(&out) {
            assert_eq!(set.len(), 1);
        }
        assert!(out.records().iter().all(|r| r.split != Split::Unassigned));
    }

    #[test]
    fn too_few_speakers() {
        let m = manifest_with(&[4, 4]);
        let f = SplitFractions::new(0.6, 0.2, 0.2).unwrap();
        assert!(matches!(split_manifest(&m, f, 0), Err(Error::Config(_))));
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(SplitFractions::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitFractions::new(0.8, 0.2, 0.0).is_err());
        assert!("0.6,0.2,0.2".parse::<SplitFractions>().is_ok());
        assert!("0.6,0.4".parse::<SplitFractions>().is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = manifest_with(&[3, 1, 4, 1, 5, 9, 2, 6]);
        let f = SplitFractions::new(0.6, 0.2, 0.2).unwrap();
        assert_eq!(split_manifest(&m, f, 11).unwrap(), split_manifest(&m, f, 11).unwrap());
    }

    #[test]
    fn paper_shaped_speaker_counts_are_disjoint() {
        // 299 + 114 + 279 speakers, one utterance each.
        let m = manifest_with(&vec![1; 692]);
        let f = SplitFractions::new(299.0 / 692.0, 114.0 / 692.0, 279.0 / 692.0).unwrap();
        let out = split_manifest(&m, f, 2022).unwrap();
        let [train, dev, test] = speaker_sets(&out);
        assert!(train.is_disjoint(&dev));
        assert!(train.is_disjoint(&test));
        assert!(dev.is_disjoint(&test));
        assert_eq!((train.len(), dev.len(), test.len()), (299, 114, 279));
    }

    proptest::proptest! {
        #[test]
        fn always_speaker_disjoint(
            sizes in proptest::collection::vec(1usize..6, 3..30),
            seed in 0u64..1000,
            a in 0.1f64..0.8,
        ) {
            let rest = 1.0 - a;
            let f = SplitFractions::new(a, rest / 2.0, rest / 2.0).unwrap();
            let out = split_manifest(&manifest_with(&sizes), f, seed).unwrap();
            let [train, dev, test] = speaker_sets(&out);
            proptest::prop_assert!(train.is_disjoint(&dev));
            proptest::prop_assert!(train.is_disjoint(&test));
            proptest::prop_assert!(dev.is_disjoint(&test));
            proptest::prop_assert!(!train.is_empty() && !dev.is_empty() && !test.is_empty());
        }
    }
}
