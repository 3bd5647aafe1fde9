//! Feature files and spectrogram export.
//!
//! A `.vpft` file is `VPFT`, a little-endian `u16` version, `u32` dims,
//! `u32` frames, then `frames * dims` row-major `f32` values. The directory
//! holding the files carries one `feature_config.json` sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{FeatureConfig, FeatureMatrix};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"VPFT";
pub const FEATURE_VERSION: u16 = 1;
pub const CONFIG_SIDECAR: &str = "feature_config.json";
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn feature_path(dir: &Path, utterance_id: &str) -> PathBuf {
    dir.join(format!("{utterance_id}.vpft"))
}

pub fn encode_features(m: &FeatureMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.values.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.dims as u32).to_le_bytes());
    buf.extend_from_slice(&(m.frames as u32).to_le_bytes());
    for v in &m.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_features(bytes: &[u8], utterance_id: &str) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!("{utterance_id}: not a VPFT feature file")));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "{utterance_id}: feature file version {version}, expected {FEATURE_VERSION}"
        )));
    }
    let dims = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * dims * frames {
        return Err(Error::Format(format!(
            "{utterance_id}: header says {frames}x{dims} but payload has {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(values, frames, dims, utterance_id)
}

pub fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    std::fs::write(path, encode_features(m)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path, utterance_id: &str) -> Result<FeatureMatrix> {
    if !path.exists() {
        return Err(Error::Data(format!(
            "missing feature file for utterance `{utterance_id}`: {}",
            path.display()
        )));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, utterance_id)
}

pub fn write_config_sidecar(dir: &Path, cfg: &FeatureConfig) -> Result<()> {
    let path = dir.join(CONFIG_SIDECAR);
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_config_sidecar(dir: &Path) -> Result<FeatureConfig> {
    let path = dir.join(CONFIG_SIDECAR);
    if !path.exists() {
        return Err(Error::MissingInput(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// One row per frame, one column per frequency bin.
pub fn write_spectrogram_csv(path: &Path, grid: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for row in grid {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Binary 8-bit PGM with time along x and frequency along y (low frequencies
/// at the bottom), grey levels spanning the grid's dB range.
pub fn spectrogram_pgm(grid: &[Vec<f64>]) -> Vec<u8> {
    let width = grid.len();
    let height = grid.first().map_or(0, Vec::len);
    let (lo, hi) = grid
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = hi - lo;
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        let bin = height - 1 - y;
        for row in grid {
            let level = if range > 0.0 {
                ((row[bin] - lo) / range * 255.0).round() as u8
            } else {
                0
            };
            buf.push(level);
        }
    }
    buf
}

pub fn write_spectrogram_pgm(path: &Path, grid: &[Vec<f64>]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&spectrogram_pgm(grid)).map_err(|e| Error::io(path, e))
}
