//! Cepstral front-end: pre-emphasis, framing, Hamming window, power
//! spectrum, linear (LFCC) or mel (MFCC) filterbank, log, DCT and
//! delta/delta-delta coefficients.

pub mod cepstra;
pub mod delta;
pub mod filterbank;
pub mod frame;
pub mod io;
pub mod spectrum;

use serde::{Deserialize, Serialize};

pub use cepstra::{cepstra, Dct};
pub use delta::add_delta_features;
pub use filterbank::{build_filterbank, Filterbank, FilterbankKind};
pub use frame::{frame_count, frame_signal, pre_emphasize};
pub use spectrum::{power_spectrum, PowerSpectrum};

use crate::corpus::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Lfcc,
    Mfcc,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Lfcc => "lfcc",
            FeatureKind::Mfcc => "mfcc",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lfcc" => Ok(FeatureKind::Lfcc),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "cqcc" => Err(Error::Config("cqcc is reserved but not implemented".into())),
            other => Err(Error::Config(format!("unknown feature kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub feature_kind: FeatureKind,
    pub sample_rate_hz: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_bins: usize,
    pub n_filters: usize,
    pub n_cepstra: usize,
    pub pre_emphasis: f64,
    pub add_deltas: bool,
    pub delta_window: usize,
    pub log_floor: f64,
    /// Per-utterance cepstral mean subtraction on the static coefficients.
    #[serde(default)]
    pub mean_norm: bool,
}

impl FeatureConfig {
    /// 20 linear filters, 20 cepstra (c0 kept) plus deltas: 60 dims.
    pub fn lfcc() -> Self {
        FeatureConfig {
            feature_kind: FeatureKind::Lfcc,
            sample_rate_hz: 16_000,
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_bins: 512,
            n_filters: 20,
            n_cepstra: 20,
            pre_emphasis: 0.97,
            add_deltas: true,
            delta_window: 2,
            log_floor: 1e-10,
            mean_norm: false,
        }
    }

    /// 26 mel filters, 13 cepstra plus deltas: 39 dims.
    pub fn mfcc() -> Self {
        FeatureConfig {
            feature_kind: FeatureKind::Mfcc,
            n_filters: 26,
            n_cepstra: 13,
            ..Self::lfcc()
        }
    }

    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Lfcc => Self::lfcc(),
            FeatureKind::Mfcc => Self::mfcc(),
        }
    }

    pub fn window_samples(&self) -> usize {
        (self.window_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn dims(&self) -> usize {
        if self.add_deltas {
            3 * self.n_cepstra
        } else {
            self.n_cepstra
        }
    }

    pub fn filterbank_kind(&self) -> FilterbankKind {
        match self.feature_kind {
            FeatureKind::Lfcc => FilterbankKind::Linear,
            FeatureKind::Mfcc => FilterbankKind::Mel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let win = self.window_samples();
        let hop = self.hop_samples();
        let fail = |m: String| Err(Error::Config(m));
        if self.sample_rate_hz == 0 {
            return fail("sample rate must be positive".into());
        }
        if win == 0 || hop == 0 {
            return fail(format!("window ({win}) and hop ({hop}) must be at least one sample"));
        }
        if hop > win {
            return fail(format!("hop ({hop}) exceeds window ({win})"));
        }
        if !self.fft_bins.is_power_of_two() || self.fft_bins < win {
            return fail(format!(
                "fft_bins ({}) must be a power of two >= window length ({win})",
                self.fft_bins
            ));
        }
        if self.n_filters < 2 {
            return fail(format!("n_filters must be >= 2, got {}", self.n_filters));
        }
        if self.n_cepstra == 0 || self.n_cepstra > self.n_filters {
            return fail(format!(
                "n_cepstra ({}) must be in 1..=n_filters ({})",
                self.n_cepstra, self.n_filters
            ));
        }
        if !(0.0..=1.0).contains(&self.pre_emphasis) {
            return fail(format!("pre_emphasis must be in [0, 1], got {}", self.pre_emphasis));
        }
        if self.add_deltas && self.delta_window == 0 {
            return fail("delta_window must be >= 1".into());
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail(format!("log_floor must be positive, got {}", self.log_floor));
        }
        Ok(())
    }
}

/// Frames x dims, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Vec<f32>,
    pub frames: usize,
    pub dims: usize,
    pub utterance_id: String,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f32>, frames: usize, dims: usize, utterance_id: impl Into<String>) -> Result<Self> {
        if values.len() != frames * dims {
            return Err(Error::Dimension(format!(
                "feature matrix {frames}x{dims} needs {} values, got {}",
                frames * dims,
                values.len()
            )));
        }
        Ok(FeatureMatrix {
            values,
            frames,
            dims,
            utterance_id: utterance_id.into(),
        })
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn column(&self, d: usize) -> Vec<f32> {
        (0..self.frames).map(|t| self.values[t * self.dims + d]).collect()
    }
}

/// Reusable front-end: filterbank, DCT and FFT plan are built once.
pub struct Extractor {
    cfg: FeatureConfig,
    spectrum: PowerSpectrum,
    filterbank: Filterbank,
    dct: Dct,
}

impl Extractor {
    pub fn new(cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Extractor {
            spectrum: PowerSpectrum::new(cfg.fft_bins),
            filterbank: build_filterbank(cfg.filterbank_kind(), cfg.n_filters, cfg.fft_bins, cfg.sample_rate_hz),
            dct: Dct::new(cfg.n_filters),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    fn check_rate(&self, w: &Waveform) -> Result<()> {
        if w.sample_rate_hz() != self.cfg.sample_rate_hz {
            return Err(Error::Config(format!(
                "waveform is {} Hz, feature config expects {} Hz",
                w.sample_rate_hz(),
                self.cfg.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Static cepstra, frames x n_cepstra.
    pub fn static_cepstra(&self, w: &Waveform) -> Result<Vec<Vec<f64>>> {
        self.check_rate(w)?;
        let frames = frame_signal(w, &self.cfg)?;
        let mut out: Vec<Vec<f64>> = frames
            .iter()
            .map(|f| {
                let power = self.spectrum.compute(f);
                cepstra(&power, &self.filterbank, &self.dct, self.cfg.n_cepstra, self.cfg.log_floor)
            })
            .collect();
        if self.cfg.mean_norm {
            let n = out.len() as f64;
            for d in 0..self.cfg.n_cepstra {
                let mean = out.iter().map(|r| r[d]).sum::<f64>() / n;
                out.iter_mut().for_each(|r| r[d] -= mean);
            }
        }
        Ok(out)
    }

    pub fn extract(&self, w: &Waveform, utterance_id: &str) -> Result<FeatureMatrix> {
        let statics = self.static_cepstra(w)?;
        let rows = if self.cfg.add_deltas {
            add_delta_features(&statics, self.cfg.delta_window)
        } else {
            statics
        };
        let frames = rows.len();
        let values: Vec<f32> = rows.into_iter().flatten().map(|v| v as f32).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{utterance_id}: non-finite feature value")));
        }
        FeatureMatrix::new(values, frames, self.cfg.dims(), utterance_id)
    }

    /// Frames x (fft_bins/2 + 1) grid of `10 log10(max(power, log_floor))`.
    pub fn spectrogram(&self, w: &Waveform) -> Result<Vec<Vec<f64>>> {
        self.check_rate(w)?;
        let floor = self.cfg.log_floor;
        Ok(frame_signal(w, &self.cfg)?
            .iter()
            .map(|f| {
                self.spectrum
                    .compute(f)
                    .into_iter()
                    .map(|p| 10.0 * p.max(floor).log10())
                    .collect()
            })
            .collect())
    }
}

/// Full front-end for one utterance.
pub fn extract(w: &Waveform, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    Extractor::new(cfg)?.extract(w, "")
}

pub fn spectrogram_grid(w: &Waveform, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    Extractor::new(cfg)?.spectrogram(w)
}
