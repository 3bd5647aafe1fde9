use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Power spectrum with a cached FFT plan.
pub struct PowerSpectrum {
    fft_bins: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl PowerSpectrum {
    pub fn new(fft_bins: usize) -> Self {
        PowerSpectrum {
            fft_bins,
            fft: FftPlanner::new().plan_fft_forward(fft_bins),
        }
    }

    /// `|DFT_k|^2` of the zero-padded frame for `k = 0..=fft_bins/2`.
    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        assert!(
            frame.len() <= self.fft_bins,
            "frame of {} samples exceeds {} FFT bins",
            frame.len(),
            self.fft_bins
        );
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_bins];
        for (b, &s) in buf.iter_mut().zip(frame) {
            b.re = s;
        }
        self.fft.process(&mut buf);
        buf[..=self.fft_bins / 2].iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn power_spectrum(frame: &[f64], fft_bins: usize) -> Vec<f64> {
    PowerSpectrum::new(fft_bins).compute(frame)
}
