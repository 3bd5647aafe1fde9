//! Toy vocoder channels: analysis/resynthesis distortions that each leave a
//! distinct spectral trace. Griffin-Lim is the real algorithm; the rest stand
//! in for neural vocoders that cannot be shipped with the crate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stft::{magnitude_distance, Spectra, Stft};
use super::Waveform;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyChannelKind {
    Identity,
    GriffinLim,
    MulawRoundtrip,
    LowpassResample,
    SpectralQuantize,
}

impl ToyChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ToyChannelKind::Identity => "identity",
            ToyChannelKind::GriffinLim => "griffin_lim",
            ToyChannelKind::MulawRoundtrip => "mulaw_roundtrip",
            ToyChannelKind::LowpassResample => "lowpass_resample",
            ToyChannelKind::SpectralQuantize => "spectral_quantize",
        }
    }
}

/// Channel kind plus its parameters. Fields unused by a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyChannelSpec {
    pub kind: ToyChannelKind,
    /// Griffin-Lim iteration count.
    pub iterations: usize,
    pub n_fft: usize,
    pub hop: usize,
    /// Mu-law companding constant.
    pub mu: f64,
    /// Mu-law code width.
    pub bits: u32,
    /// Decimation factor of the low-pass resampler.
    pub factor: usize,
    /// Magnitude quantization step in dB.
    pub step_db: f64,
}

impl ToyChannelSpec {
    pub fn new(kind: ToyChannelKind) -> Self {
        ToyChannelSpec {
            kind,
            iterations: 32,
            n_fft: 512,
            hop: 128,
            mu: 255.0,
            bits: 8,
            factor: 4,
            step_db: 6.0,
        }
    }

    pub fn identity() -> Self {
        Self::new(ToyChannelKind::Identity)
    }

    pub fn griffin_lim(iterations: usize) -> Self {
        ToyChannelSpec {
            iterations,
            ..Self::new(ToyChannelKind::GriffinLim)
        }
    }

    pub fn mulaw() -> Self {
        Self::new(ToyChannelKind::MulawRoundtrip)
    }

    pub fn lowpass(factor: usize) -> Self {
        ToyChannelSpec {
            factor,
            ..Self::new(ToyChannelKind::LowpassResample)
        }
    }

    pub fn spectral_quantize(step_db: f64) -> Self {
        ToyChannelSpec {
            step_db,
            ..Self::new(ToyChannelKind::SpectralQuantize)
        }
    }

    /// Short class name used in manifests.
    pub fn class_name(&self) -> &'static str {
        match self.kind {
            ToyChannelKind::Identity => "identity",
            ToyChannelKind::GriffinLim => "griffin_lim",
            ToyChannelKind::MulawRoundtrip => "mulaw",
            ToyChannelKind::LowpassResample => "lowpass",
            ToyChannelKind::SpectralQuantize => "spectral_quantize",
        }
    }

    fn is_spectral(&self) -> bool {
        matches!(
            self.kind,
            ToyChannelKind::GriffinLim | ToyChannelKind::SpectralQuantize
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.kind.as_str())));
        match self.kind {
            ToyChannelKind::Identity => Ok(()),
            ToyChannelKind::GriffinLim | ToyChannelKind::SpectralQuantize => {
                if self.kind == ToyChannelKind::GriffinLim && self.iterations < 1 {
                    return bad("iterations must be >= 1".into());
                }
                if self.kind == ToyChannelKind::SpectralQuantize
                    && !(self.step_db > 0.0 && self.step_db.is_finite())
                {
                    return bad(format!("step_db must be positive, got {}", self.step_db));
                }
                if self.n_fft < 16 || !self.n_fft.is_power_of_two() {
                    return bad(format!("n_fft must be a power of two >= 16, got {}", self.n_fft));
                }
                if self.hop == 0 || self.hop > self.n_fft / 2 {
                    return bad(format!("hop must be in 1..={}, got {}", self.n_fft / 2, self.hop));
                }
                Ok(())
            }
            ToyChannelKind::MulawRoundtrip => {
                if !(self.mu > 0.0 && self.mu.is_finite()) {
                    return bad(format!("mu must be positive, got {}", self.mu));
                }
                if !(2..=16).contains(&self.bits) {
                    return bad(format!("bits must be in 2..=16, got {}", self.bits));
                }
                Ok(())
            }
            ToyChannelKind::LowpassResample => {
                if !(2..=16).contains(&self.factor) {
                    return bad(format!("factor must be in 2..=16, got {}", self.factor));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ToyChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.class_name())
    }
}

/// Parses `name[:key=value;...]`, e.g. `griffin_lim:iterations=8` or `lowpass:factor=4`.
impl FromStr for ToyChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name.trim() {
            "identity" => ToyChannelKind::Identity,
            "griffin_lim" | "gl" => ToyChannelKind::GriffinLim,
            "mulaw" | "mulaw_roundtrip" => ToyChannelKind::MulawRoundtrip,
            "lowpass" | "lowpass_resample" => ToyChannelKind::LowpassResample,
            "spectral_quantize" | "specq" => ToyChannelKind::SpectralQuantize,
            other => return Err(Error::Config(format!("unknown channel kind `{other}`"))),
        };
        let mut spec = ToyChannelSpec::new(kind);
        for kv in params.into_iter().flat_map(|p| p.split(';')) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad channel parameter `{kv}`")))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad value for `{k}`: `{v}`")))
            };
            match k.trim() {
                "iterations" => spec.iterations = num(v)? as usize,
                "n_fft" => spec.n_fft = num(v)? as usize,
                "hop" => spec.hop = num(v)? as usize,
                "mu" => spec.mu = num(v)?,
                "bits" => spec.bits = num(v)? as u32,
                "factor" => spec.factor = num(v)? as usize,
                "step_db" => spec.step_db = num(v)?,
                other => return Err(Error::Config(format!("unknown channel parameter `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Runs `w` through the channel. The output is a pure function of
/// `(w, spec, seed)` and has the same length as the input.
pub fn apply_toy_channel(w: &Waveform, spec: &ToyChannelSpec, seed: u64) -> Result<Waveform> {
    spec.validate()?;
    let mut rng = crate::rng::stream(seed, &[]);
    if spec.is_spectral() && w.len() < spec.n_fft {
        return Err(Error::Length(format!(
            "{} needs at least {} samples, got {}",
            spec.kind.as_str(),
            spec.n_fft,
            w.len()
        )));
    }
    let x = w.samples();
    let y = match spec.kind {
        ToyChannelKind::Identity => x.to_vec(),
        ToyChannelKind::GriffinLim => {
            let stft = Stft::new(spec.n_fft, spec.hop);
            let target = Stft::magnitudes(&stft.analyze(x));
            griffin_lim(&stft, &target, x.len(), spec.iterations, &mut rng).signal
        }
        ToyChannelKind::MulawRoundtrip => x.iter().map(|&s| mulaw_roundtrip(s, spec.mu, spec.bits)).collect(),
        ToyChannelKind::LowpassResample => lowpass_resample(x, spec.factor),
        ToyChannelKind::SpectralQuantize => spectral_quantize(x, spec),
    };
    let y = y.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
    Waveform::new(y, w.sample_rate_hz())
}

pub struct GriffinLimOutput {
    pub signal: Vec<f64>,
    /// `errors[i]` is the Frobenius distance between the target magnitudes and
    /// the STFT magnitudes of the estimate after iteration `i + 1`.
    pub errors: Vec<f64>,
}

/// Iterative phase reconstruction from STFT magnitudes: starting from random
/// phase, alternately invert to a signal, re-analyse, keep the new phase and
/// restore the target magnitudes.
pub fn griffin_lim(
    stft: &Stft,
    target: &[Vec<f64>],
    len: usize,
    iterations: usize,
    rng: &mut Rng,
) -> GriffinLimOutput {
    let n_fft = stft.n_fft();
    let half = n_fft / 2;
    let mut spectra: Spectra = target
        .iter()
        .map(|mags| {
            let mut frame = vec![Complex64::new(0.0, 0.0); n_fft];
            for k in 0..=half {
                let phase = if k == 0 || k == half {
                    0.0
                } else {
                    rng.random_range(0.0..2.0 * PI)
                };
                frame[k] = Complex64::from_polar(mags[k], phase);
                if k != 0 && k != half {
                    frame[n_fft - k] = frame[k].conj();
                }
            }
            frame
        })
        .collect();

    let mut errors = Vec::with_capacity(iterations);
    let mut signal = Vec::new();
    for _ in 0..iterations {
        signal = stft.synthesize(&spectra, len);
        let rebuilt = stft.analyze(&signal);
        errors.push(magnitude_distance(target, &Stft::magnitudes(&rebuilt)));
        for (frame, (new, mags)) in spectra.iter_mut().zip(rebuilt.iter().zip(target)) {
            for ((c, n), &m) in frame.iter_mut().zip(new).zip(mags) {
                let norm = n.norm();
                *c = if norm > 0.0 {
                    n * (m / norm)
                } else {
                    Complex64::new(m, 0.0)
                };
            }
        }
    }
    GriffinLimOutput { signal, errors }
}

pub fn mulaw_roundtrip(x: f64, mu: f64, bits: u32) -> f64 {
    let levels = (1u64 << bits) as f64 - 1.0;
    let x = x.clamp(-1.0, 1.0);
    let y = x.signum() * (1.0 + mu * x.abs()).ln() / (1.0 + mu).ln();
    let q = ((y + 1.0) * 0.5 * levels).round();
    let y = q / levels * 2.0 - 1.0;
    y.signum() * ((1.0 + mu).powf(y.abs()) - 1.0) / mu
}

/// Windowed-sinc low-pass with cutoff `0.5 / factor` cycles per sample and
/// unity DC gain.
fn lowpass_kernel(factor: usize) -> Vec<f64> {
    let half = 16 * factor;
    let fc = 0.5 / factor as f64;
    let taps: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let n = i as f64 - half as f64;
            let sinc = if n == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * n).sin() / (PI * n)
            };
            let blackman = 0.42 - 0.5 * (2.0 * PI * i as f64 / (2 * half) as f64).cos()
                + 0.08 * (4.0 * PI * i as f64 / (2 * half) as f64).cos();
            sinc * blackman
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

fn convolve_centered(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as isize;
    (0..x.len() as isize)
        .map(|n| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(k, &h)| {
                    let i = n + half - k as isize;
                    (i >= 0 && (i as usize) < x.len()).then(|| h * x[i as usize])
                })
                .sum()
        })
        .collect()
}

/// Decimate by `factor` and interpolate back to the original rate.
pub fn lowpass_resample(x: &[f64], factor: usize) -> Vec<f64> {
    let kernel = lowpass_kernel(factor);
    let filtered = convolve_centered(x, &kernel);
    let mut upsampled = vec![0.0; x.len()];
    for i in (0..x.len()).step_by(factor) {
        upsampled[i] = filtered[i] * factor as f64;
    }
    convolve_centered(&upsampled, &kernel)
}

fn spectral_quantize(x: &[f64], spec: &ToyChannelSpec) -> Vec<f64> {
    let stft = Stft::new(spec.n_fft, spec.hop);
    let mut spectra = stft.analyze(x);
    for frame in &mut spectra {
        for c in frame.iter_mut() {
            let m = c.norm();
            if m > 1e-12 {
                let db = 20.0 * m.log10();
                let q = (db / spec.step_db).round() * spec.step_db;
                *c *= 10f64.powf(q / 20.0) / m;
            }
        }
    }
    stft.synthesize(&spectra, x.len())
}
