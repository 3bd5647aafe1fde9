//! Spectral front-end against direct oracles.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng as _;
use vocoder_fingerprint::corpus::Waveform;
use vocoder_fingerprint::features::delta::deltas;
use vocoder_fingerprint::features::{self, add_delta_features, frame_count, power_spectrum, Dct, FeatureConfig};
use vocoder_fingerprint::rng;

/// Direct O(N^2) power spectrum of the zero-padded frame.
fn dft_power(frame: &[f64], n: usize) -> Vec<f64> {
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub fn power_spectrum_matches_direct_dft_on_random_frames() {
    let mut r = rng::stream(2024, &[1]);
    for trial in 0..20 {
        let n = [256, 512, 1024][trial % 3];
        let len = r.random_range(1..=n);
        let frame: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let fast = power_spectrum(&frame, n);
        let slow = dft_power(&frame, n);
        assert_eq!(fast.len(), n / 2 + 1);
        let scale = slow.iter().cloned().fold(0.0, f64::max);
        for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
            assert!((a - b).abs() <= 1e-9 * scale, "trial {trial} bin {k}: {a} vs {b}");
        }
    }
}

pub fn dct_round_trip_on_random_vectors() {
    let mut r = rng::stream(2024, &[2]);
    for n in [2, 7, 20, 26, 40, 64] {
        let dct = Dct::new(n);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let back = dct.inverse(&dct.forward(&x, n));
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-9 * norm, "n={n}: {a} vs {b}");
        }
        let c = dct.forward(&x, n);
        let energy = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((energy - norm).abs() <= 1e-9 * norm);
    }
}

pub fn frame_count_law() {
    let mut runner = TestRunner::deterministic();
    let strategy = (0usize..200_000, 1usize..2048, 1usize..1024);
    runner
        .run(&strategy, |(n, win, hop)| {
            let expected = if n < win { 0 } else { (n - win) / hop + 1 };
            prop_assert_eq!(frame_count(n, win, hop), expected);
            Ok(())
        })
        .unwrap();
}

pub fn extracted_frames_follow_the_law() {
    let mut runner = TestRunner::new(Config { cases: 32, ..Config::default() });
    runner
        .run(&(400usize..6000), |n| {
            let mut r = rng::stream(n as u64, &[3]);
            let w = Waveform::new((0..n).map(|_| r.random_range(-0.5..0.5)).collect(), 16_000).unwrap();
            let m = features::extract(&w, &FeatureConfig::lfcc()).unwrap();
            prop_assert_eq!(m.frames, (n - 400) / 160 + 1);
            prop_assert_eq!(m.values.len(), m.frames * m.dims);
            Ok(())
        })
        .unwrap();
}

pub fn constant_input_has_exactly_zero_deltas() {
    let rows = vec![vec![3.25, -1.5, 0.1, 1e6]; 17];
    for window in 1..=4 {
        for row in deltas(&rows, window) {
            assert!(row.iter().all(|&v| v == 0.0));
        }
        for row in add_delta_features(&rows, window) {
            assert_eq!(row.len(), 12);
            assert!(row[4..].iter().all(|&v| v == 0.0));
        }
    }
}

pub fn twenty_cepstra_lfcc_with_deltas_is_sixty_dims() {
    let cfg = FeatureConfig::lfcc();
    assert_eq!((cfg.n_cepstra, cfg.add_deltas), (20, true));
    let mut r = rng::stream(7, &[4]);
    let w = Waveform::new((0..16_000).map(|_| r.random_range(-0.5..0.5)).collect(), 16_000).unwrap();
    let m = features::extract(&w, &cfg).unwrap();
    assert_eq!((m.frames, m.dims), (98, 60));
}

/// Every check in the suite, by name.
pub const ALL: &[(&str, fn())] = &[
    ("power_spectrum_matches_direct_dft_on_random_frames", power_spectrum_matches_direct_dft_on_random_frames),
    ("dct_round_trip_on_random_vectors", dct_round_trip_on_random_vectors),
    ("frame_count_law", frame_count_law),
    ("extracted_frames_follow_the_law", extracted_frames_follow_the_law),
    ("constant_input_has_exactly_zero_deltas", constant_input_has_exactly_zero_deltas),
    ("twenty_cepstra_lfcc_with_deltas_is_sixty_dims", twenty_cepstra_lfcc_with_deltas_is_sixty_dims),
];
