//! Synthetic corpus: pseudo-speech base signals passed through every toy
//! channel, one class per channel.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

use super::channels::{apply_toy_channel, ToyChannelSpec};
use super::manifest::{Manifest, Split, UtteranceRecord};
use super::wav::write_wav;
use super::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSettings {
    /// Number of base signals; each yields one utterance per channel.
    pub base_signals: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub sample_rate_hz: u32,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            base_signals: 100,
            min_duration_s: 1.0,
            max_duration_s: 2.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SpeakerProfile {
    f0_low: f64,
    f0_high: f64,
    /// Scales formant frequencies (vocal-tract length).
    formant_scale: f64,
}

impl SpeakerProfile {
    fn draw(rng: &mut Rng) -> Self {
        let f0_low = rng.random_range(85.0..220.0);
        SpeakerProfile {
            f0_low,
            f0_high: f0_low * rng.random_range(1.2..1.6),
            formant_scale: rng.random_range(0.85..1.2),
        }
    }
}

/// Two-pole resonator run in place.
fn resonate(x: &mut [f64], freq: f64, bandwidth: f64, sr: f64) {
    let r = (-PI * bandwidth / sr).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / sr).cos();
    let a2 = -r * r;
    let gain = 1.0 - r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for s in x.iter_mut() {
        let y = gain * *s + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *s = y;
    }
}

/// Harmonic source with a wandering f0 inside the speaker's range, shaped by
/// three random formant resonators and a syllable-like on/off envelope.
fn base_signal(profile: &SpeakerProfile, settings: &SynthSettings, rng: &mut Rng) -> Vec<f64> {
    let sr = settings.sample_rate_hz as f64;
    let dur = if settings.max_duration_s > settings.min_duration_s {
        rng.random_range(settings.min_duration_s..settings.max_duration_s)
    } else {
        settings.min_duration_s
    };
    let n = (dur * sr).round() as usize;
    let nyquist = sr / 2.0;

    let vib_rate = rng.random_range(0.5..3.0);
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let mut theta = rng.random_range(0.0..2.0 * PI);
    let mut x = vec![0.0; n];
    for (i, s) in x.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let f0 = profile.f0_low
            + (profile.f0_high - profile.f0_low)
                * (0.5 + 0.5 * (2.0 * PI * vib_rate * t + vib_phase).sin());
        theta = (theta + 2.0 * PI * f0 / sr) % (2.0 * PI);
        let harmonics = ((0.95 * nyquist) / f0).floor() as usize;
        // sin(k*theta) by repeated rotation.
        let (c1, s1) = (theta.cos(), theta.sin());
        let (mut ck, mut sk) = (c1, s1);
        let mut acc = 0.0;
        for k in 1..=harmonics {
            acc += sk / k as f64;
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        *s = acc + rng.random_range(-0.01..0.01);
    }

    for (lo, hi, bw) in [(300.0, 900.0, 80.0), (900.0, 2400.0, 120.0), (2400.0, 3600.0, 180.0)] {
        let f = rng.random_range(lo..hi) * profile.formant_scale;
        resonate(&mut x, f.min(0.9 * nyquist), bw, sr);
    }

    // Syllables separated by short pauses.
    let mut envelope = vec![0.0; n];
    let mut pos = (rng.random_range(0.02..0.08) * sr) as usize;
    while pos < n {
        let len = (rng.random_range(0.12..0.30) * sr) as usize;
        let peak = rng.random_range(0.5..1.0);
        for j in 0..len.min(n - pos) {
            envelope[pos + j] = peak * (PI * j as f64 / len as f64).sin().powi(2);
        }
        pos += len + (rng.random_range(0.03..0.12) * sr) as usize;
    }
    for (s, e) in x.iter_mut().zip(&envelope) {
        *s *= e;
    }

    let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let target = rng.random_range(0.5..0.9);
    if peak > 0.0 {
        x.iter_mut().for_each(|s| *s *= target / peak);
    }
    x
}

/// An in-memory corpus: manifest plus the audio of every record, in order.
pub struct Corpus {
    pub manifest: Manifest,
    pub audio: Vec<Waveform>,
    /// The shared base signal of each record.
    pub base_index: Vec<usize>,
}

fn validate_request(channels: &[ToyChannelSpec], speakers: usize, settings: &SynthSettings) -> Result<()> {
    if channels.len() < 2 {
        return Err(Error::Config(format!("need at least 2 channels, got {}", channels.len())));
    }
    if speakers < 3 {
        return Err(Error::Config(format!(
            "need at least 3 speakers so every split can hold one, got {speakers}"
        )));
    }
    if settings.base_signals == 0 {
        return Err(Error::Config("base_signals must be positive".into()));
    }
    if !(settings.min_duration_s > 0.0 && settings.max_duration_s >= settings.min_duration_s) {
        return Err(Error::Config(format!(
            "bad duration range {}..{}",
            settings.min_duration_s, settings.max_duration_s
        )));
    }
    for c in channels {
        c.validate()?;
    }
    let mut names: Vec<&str> = channels.iter().map(|c| c.class_name()).collect();
    names.sort();
    names.dedup();
    if names.len() != channels.len() {
        return Err(Error::Config("channel class names must be distinct".into()));
    }
    Ok(())
}

pub fn utterance_id(base: usize, channel: &ToyChannelSpec) -> String {
    format!("u{base:05}_{}", channel.class_name())
}

/// Builds the corpus in memory. Every random draw comes from a stream keyed
/// by `(seed, speaker)`, `(seed, base index)` or `(seed, base index, channel)`,
/// so the result does not depend on how work is scheduled.
pub fn generate_corpus(
    settings: &SynthSettings,
    channels: &[ToyChannelSpec],
    speakers: usize,
    seed: u64,
) -> Result<Corpus> {
    validate_request(channels, speakers, settings)?;
    let profiles: Vec<SpeakerProfile> = (0..speakers)
        .map(|s| SpeakerProfile::draw(&mut rng::stream(seed, &[rng::tag::SPEAKER, s as u64])))
        .collect();

    let per_base: Vec<Vec<Waveform>> = (0..settings.base_signals)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[rng::tag::BASE_SIGNAL, b as u64]);
            let base = Waveform::new(
                base_signal(&profiles[b % speakers], settings, &mut r),
                settings.sample_rate_hz,
            )?;
            channels
                .iter()
                .enumerate()
                .map(|(c, spec)| {
                    let s = rng::derive_seed(seed, &[rng::tag::CHANNEL, b as u64, c as u64]);
                    apply_toy_channel(&base, spec, s)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut manifest = Manifest::new(channels.iter().map(|c| c.class_name().to_string()).collect())?;
    let mut audio = Vec::new();
    let mut base_index = Vec::new();
    for (b, outputs) in per_base.into_iter().enumerate() {
        for (c, (spec, w)) in channels.iter().zip(outputs).enumerate() {
            let id = utterance_id(b, spec);
            manifest.push(UtteranceRecord {
                path: PathBuf::from("audio").join(spec.class_name()).join(format!("{id}.wav")),
                id,
                label: c,
                speaker_id: format!("spk{:03}", b % speakers),
                split: Split::Unassigned,
                duration_s: w.duration_s(),
            })?;
            audio.push(w);
            base_index.push(b);
        }
    }
    Ok(Corpus {
        manifest,
        audio,
        base_index,
    })
}

/// Regenerates the base signal used for base index `b`.
pub fn regenerate_base(settings: &SynthSettings, speakers: usize, seed: u64, b: usize) -> Waveform {
    let profile = SpeakerProfile::draw(&mut rng::stream(
        seed,
        &[rng::tag::SPEAKER, (b % speakers) as u64],
    ));
    let mut r = rng::stream(seed, &[rng::tag::BASE_SIGNAL, b as u64]);
    Waveform::new(base_signal(&profile, settings, &mut r), settings.sample_rate_hz)
        .expect("generated base signal is finite")
}

/// Generates the corpus under `out_dir`: `manifest.tsv` plus
/// `audio/<class>/<id>.wav`. Returns the manifest.
pub fn synth_corpus(
    settings: &SynthSettings,
    channels: &[ToyChannelSpec],
    speakers: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    let corpus = generate_corpus(settings, channels, speakers, seed)?;
    for spec in channels {
        let dir = out_dir.join("audio").join(spec.class_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    corpus
        .manifest
        .records()
        .par_iter()
        .zip(corpus.audio.par_iter())
        .try_for_each(|(r, w)| write_wav(w, out_dir.join(&r.path)))?;
    corpus.manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(corpus.manifest)
}
