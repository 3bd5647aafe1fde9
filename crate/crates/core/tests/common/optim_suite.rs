//! Training loop sanity: memorising a tiny set and the learning-rate endpoints.

use vocoder_fingerprint::corpus::synth::generate_corpus;
use vocoder_fingerprint::corpus::{Split, SynthSettings, ToyChannelSpec};
use vocoder_fingerprint::eval::LabeledSet;
use vocoder_fingerprint::features::FeatureConfig;
use vocoder_fingerprint::nnet::{ModelConfig, Variant};
use vocoder_fingerprint::trainer::batch::make_batches;
use vocoder_fingerprint::trainer::{coefficient_stats, lr_schedule, TrainConfig, Trainer};

pub fn channels() -> Vec<ToyChannelSpec> {
    vec![
        ToyChannelSpec::identity(),
        ToyChannelSpec::griffin_lim(8),
        ToyChannelSpec::mulaw(),
        ToyChannelSpec::lowpass(4),
    ]
}

pub fn one_second(base_signals: usize) -> SynthSettings {
    SynthSettings {
        base_signals,
        min_duration_s: 1.0,
        max_duration_s: 1.0,
        ..Default::default()
    }
}

/// Eight one-second utterances: two base signals through four channels.
pub fn eight_utterances() -> LabeledSet {
    let corpus = generate_corpus(&one_second(2), &channels(), 3, 11).unwrap();
    let mut manifest = corpus.manifest.clone();
    for r in manifest.records_mut() {
        r.split = Split::Train;
    }
    LabeledSet::from_audio(&manifest, Split::Train, &corpus.audio, &FeatureConfig::lfcc()).unwrap()
}

pub fn trainer_for(set: &LabeledSet, cfg: &TrainConfig, total: u64) -> Trainer {
    let mc = ModelConfig::new(Variant::ResnetStaged, 4, 60);
    let mut t = Trainer::new(&mc, cfg, total).unwrap();
    let (mean, std) = coefficient_stats(&set.features);
    t.model_mut().set_input_norm(&mean, &std).unwrap();
    t
}

pub fn eight_utterances_overfit_within_200_steps() {
    let set = eight_utterances();
    assert_eq!(set.len(), 8);
    assert!(set.features.iter().all(|f| f.frames == 98));
    let cfg = TrainConfig { batch_size: 8, crop_frames: 98, seed: 3, ..Default::default() };
    let mut t = trainer_for(&set, &cfg, 200);
    let batch = make_batches(&set.features, &set.labels, 98, 8, 3, 1).unwrap().remove(0);
    let mut losses = Vec::new();
    while t.step() < 200 {
        let loss = t.train_step(&batch).unwrap();
        losses.push(loss);
        if loss < 0.01 {
            break;
        }
    }
    let last = *losses.last().unwrap();
    assert!(last < 0.01, "loss {last} after {} steps", losses.len());
    assert!((losses[0] - 4f64.ln()).abs() < 1.0, "initial loss {}", losses[0]);
}

pub fn schedule_endpoints_are_exact() {
    assert_eq!(lr_schedule(0, 1000, 0.001), 0.001);
    assert_eq!(lr_schedule(1000, 1000, 0.001), 0.0);
    assert_eq!(lr_schedule(500, 1000, 0.001), 0.0005);
    assert_eq!(lr_schedule(0, 0, 0.001), 0.0);
}

/// Every check in the suite, by name.
pub const ALL: &[(&str, fn())] = &[
    ("eight_utterances_overfit_within_200_steps", eight_utterances_overfit_within_200_steps),
    ("schedule_endpoints_are_exact", schedule_endpoints_are_exact),
];
