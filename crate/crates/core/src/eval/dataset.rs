//! Labeled feature matrices for one manifest split.

use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{read_wav, Manifest, Split, Waveform};
use crate::error::{Error, Result};
use crate::features::io::{feature_path, read_config_sidecar, read_features};
use crate::features::{Extractor, FeatureConfig, FeatureMatrix};

#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub class_names: Vec<String>,
    pub feature_config: FeatureConfig,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub features: Vec<FeatureMatrix>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Loads previously extracted features from `dir`, whose sidecar
    /// records the configuration they were made with.
    pub fn from_features_dir(manifest: &Manifest, split: Split, dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::MissingInput(dir.to_path_buf()));
        }
        let feature_config = read_config_sidecar(dir)?;
        let records: Vec<_> = manifest.split_records(split).collect();
        let features = records
            .par_iter()
            .map(|r| read_features(&feature_path(dir, &r.id), &r.id))
            .collect::<Result<Vec<_>>>()?;
        for f in &features {
            if f.dims != feature_config.dims() {
                return Err(Error::Data(format!(
                    "utterance {} has {} feature dims, sidecar config gives {}",
                    f.utterance_id,
                    f.dims,
                    feature_config.dims()
                )));
            }
        }
        Ok(LabeledSet {
            class_names: manifest.classes().to_vec(),
            feature_config,
            ids: records.iter().map(|r| r.id.clone()).collect(),
            labels: records.iter().map(|r| r.label).collect(),
            features,
        })
    }

    /// Extracts features from in-memory audio aligned with `manifest.records()`.
    pub fn from_audio(manifest: &Manifest, split: Split, audio: &[Waveform], cfg: &FeatureConfig) -> Result<Self> {
        if audio.len() != manifest.len() {
            return Err(Error::Data(format!(
                "{} waveforms for {} manifest records",
                audio.len(),
                manifest.len()
            )));
        }
        let extractor = Extractor::new(cfg)?;
        let picked: Vec<usize> = (0..manifest.len())
            .filter(|&i| manifest.records()[i].split == split)
            .collect();
        let records = manifest.records();
        let features = picked
            .par_iter()
            .map(|&i| extractor.extract(&audio[i], &records[i].id))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledSet {
            class_names: manifest.classes().to_vec(),
            feature_config: cfg.clone(),
            ids: picked.iter().map(|&i| records[i].id.clone()).collect(),
            labels: picked.iter().map(|&i| records[i].label).collect(),
            features,
        })
    }

    /// Extracts features straight from the audio; record paths are resolved
    /// against `audio_root`.
    pub fn extract(manifest: &Manifest, split: Split, audio_root: &Path, cfg: &FeatureConfig) -> Result<Self> {
        let extractor = Extractor::new(cfg)?;
        let records: Vec<_> = manifest.split_records(split).collect();
        let features = records
            .par_iter()
            .map(|r| {
                let w = read_wav(audio_root.join(&r.path))?;
                extractor.extract(&w, &r.id)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledSet {
            class_names: manifest.classes().to_vec(),
            feature_config: cfg.clone(),
            ids: records.iter().map(|r| r.id.clone()).collect(),
            labels: records.iter().map(|r| r.label).collect(),
            features,
        })
    }
}
