//! Griffin-Lim consistency error across iterations.

use rand::Rng as _;
use vocoder_fingerprint::corpus::griffin_lim;
use vocoder_fingerprint::corpus::stft::Stft;
use vocoder_fingerprint::rng;

const TOLERANCE: f64 = 1e-9;

fn assert_non_increasing(errors: &[f64], what: &str) {
    for (i, w) in errors.windows(2).enumerate() {
        assert!(w[1] <= w[0] + TOLERANCE, "{what}: error rose at iteration {} ({} -> {})", i + 1, w[0], w[1]);
    }
    assert!(errors.last() < errors.first(), "{what}: no progress");
}

pub fn consistency_error_never_increases_on_random_signals() {
    for seed in 0..6u64 {
        let mut r = rng::stream(seed, &[10]);
        let len = r.random_range(1500..5000);
        let x: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let (n_fft, hop) = [(256, 64), (512, 128), (512, 256)][seed as usize % 3];
        let stft = Stft::new(n_fft, hop);
        let target = Stft::magnitudes(&stft.analyze(&x));
        let out = griffin_lim(&stft, &target, len, 40, &mut rng::stream(seed, &[11]));
        assert_eq!(out.errors.len(), 40);
        assert_eq!(out.signal.len(), len);
        assert_non_increasing(&out.errors, &format!("signal seed {seed}"));
    }
}

pub fn consistency_error_never_increases_on_random_magnitudes() {
    for seed in 0..5u64 {
        let mut r = rng::stream(seed, &[12]);
        let stft = Stft::new(256, 64);
        let len = 2000;
        let target: Vec<Vec<f64>> = (0..stft.n_frames(len))
            .map(|_| {
                let half: Vec<f64> = (0..=128).map(|_| r.random_range(0.0..3.0)).collect();
                (0..256).map(|k| half[if k <= 128 { k } else { 256 - k }]).collect()
            })
            .collect();
        let out = griffin_lim(&stft, &target, len, 30, &mut rng::stream(seed, &[13]));
        assert_non_increasing(&out.errors, &format!("magnitude seed {seed}"));
    }
}

/// Every check in the suite, by name.
pub const ALL: &[(&str, fn())] = &[
    ("consistency_error_never_increases_on_random_signals", consistency_error_never_increases_on_random_signals),
    ("consistency_error_never_increases_on_random_magnitudes", consistency_error_never_increases_on_random_magnitudes),
];
