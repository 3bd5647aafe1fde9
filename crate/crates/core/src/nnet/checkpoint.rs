//! Checkpoint file: `VPCK`, a u16 version, a u32 header length, a JSON
//! header, then every tensor as little-endian f32 in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const MAGIC: &[u8; 4] = b"VPCK";
pub const VERSION: u16 = 1;

/// Optimiser and schedule state needed to resume training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub step: u64,
    pub epoch: usize,
    pub seed: u64,
    pub dev_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub class_names: Vec<String>,
    pub feature_config: Option<FeatureConfig>,
    pub trainer: Option<TrainerState>,
    /// Parameters, buffers and (when resumable) optimiser moments.
    pub tensors: Vec<(String, Tensor<f32>)>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_config: ModelConfig,
    class_names: Vec<String>,
    feature_config: Option<FeatureConfig>,
    trainer: Option<TrainerState>,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(
        model: &Model<T>,
        class_names: &[String],
        feature_config: Option<&FeatureConfig>,
    ) -> Self {
        let tensors = model
            .params()
            .iter()
            .chain(model.buffers())
            .map(|p| (p.name.clone(), p.tensor.cast()))
            .collect();
        Checkpoint {
            model_config: model.config().clone(),
            class_names: class_names.to_vec(),
            feature_config: feature_config.cloned(),
            trainer: None,
            tensors,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Rebuilds the model described by the header and loads its tensors.
    pub fn to_model<T: Scalar>(&self) -> Result<Model<T>> {
        if self.class_names.len() != self.model_config.n_classes {
            return Err(Error::Checkpoint(format!(
                "checkpoint lists {} class names for a {}-class model",
                self.class_names.len(),
                self.model_config.n_classes
            )));
        }
        let mut model = Model::new(&self.model_config, 0)?;
        model.load_tensors(|n| self.tensor(n))?;
        Ok(model)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = Header {
            model_config: self.model_config.clone(),
            class_names: self.class_names.clone(),
            feature_config: self.feature_config.clone(),
            trainer: self.trainer.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let payload: usize = self.tensors.iter().map(|(_, t)| t.len() * 4).sum();
        let mut out = Vec::with_capacity(10 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 10 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let json = bytes
            .get(10..10 + hlen)
            .ok_or_else(|| bad("truncated checkpoint header"))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let mut pos = 10 + hlen;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let raw = bytes.get(pos..pos + 4 * n).ok_or_else(|| {
                Error::Checkpoint(format!("truncated data for tensor `{}`", entry.name))
            })?;
            pos += 4 * n;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((entry.name, Tensor::new(entry.shape, data)));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            model_config: header.model_config,
            class_names: header.class_names,
            feature_config: header.feature_config,
            trainer: header.trainer,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::model::Variant;

    fn small() -> Model<f32> {
        Model::new(&ModelConfig::new(Variant::ResnetStaged, 3, 20), 11).unwrap()
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small();
        let mut ck = Checkpoint::from_model(&m, &names(), Some(&FeatureConfig::lfcc()));
        ck.trainer = Some(TrainerState {
            step: 7,
            epoch: 1,
            seed: 3,
            dev_macro_f1: Some(0.5),
        });
        let back = Checkpoint::decode(&ck.encode().unwrap()).unwrap();
        assert_eq!(back, ck);
        let m2: Model<f32> = back.to_model().unwrap();
        for (a, b) in m.params().iter().zip(m2.params()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn decode_then_encode_reproduces_bytes() {
        let mut ck = Checkpoint::from_model(&small(), &names(), Some(&FeatureConfig::lfcc()));
        let mut r = crate::rng::stream(4, &[]);
        for _ in 0..200 {
            ck.trainer = Some(TrainerState {
                step: 1,
                epoch: 1,
                seed: 0,
                dev_macro_f1: Some(rand::Rng::random::<f64>(&mut r)),
            });
            let bytes = ck.encode().unwrap();
            assert_eq!(Checkpoint::decode(&bytes).unwrap().encode().unwrap(), bytes);
        }
    }

    #[test]
    fn missing_tensor_is_named() {
        let m = small();
        let mut ck = Checkpoint::from_model(&m, &names(), None);
        ck.tensors.retain(|(n, _)| n != "layer2.0.bn1.weight");
        let err = ck.to_model::<f32>().unwrap_err().to_string();
        assert!(err.contains("layer2.0.bn1.weight"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_named() {
        let m = small();
        let mut ck = Checkpoint::from_model(&m, &names(), None);
        let slot = ck.tensors.iter_mut().find(|(n, _)| n == "fc.bias").unwrap();
        slot.1 = Tensor::zeros(&[4]);
        let err = ck.to_model::<f32>().unwrap_err().to_string();
        assert!(err.contains("fc.bias") && err.contains("mismatch"), "{err}");
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        let mut bytes = Checkpoint::from_model(&small(), &names(), None).encode().unwrap();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn flat16_into_staged_names_tensor() {
        let flat: Model<f32> = Model::new(&ModelConfig::new(Variant::ResnetFlat16, 3, 20), 1).unwrap();
        let mut ck = Checkpoint::from_model(&flat, &names(), None);
        ck.model_config = ModelConfig::new(Variant::ResnetStaged, 3, 20);
        let err = ck.to_model::<f32>().unwrap_err().to_string();
        assert!(err.contains("layer2.0.conv1.weight") && err.contains("mismatch"), "{err}");
    }

    #[test]
    fn truncated_header_fails() {
        assert!(Checkpoint::decode(b"nope").is_err());
    }
}
