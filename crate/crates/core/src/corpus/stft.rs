//! Centered STFT with a least-squares inverse, shared by the spectral toy
//! channels.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Frame `t` is centered on sample `t * hop`; samples outside the signal read
/// as zero. The window is periodic Hann.
pub struct Stft {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Full (two-sided) spectra, one `Vec` of `n_fft` bins per frame.
pub type Spectra = Vec<Vec<Complex64>>;

impl Stft {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        assert!(n_fft >= 2 && hop >= 1 && hop <= n_fft, "invalid STFT geometry");
        let window = (0..n_fft)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / n_fft as f64).cos())
            .collect();
        let mut planner = FftPlanner::new();
        Stft {
            n_fft,
            hop,
            window,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_frames(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    fn frame_start(&self, t: usize) -> isize {
        (t * self.hop) as isize - (self.n_fft / 2) as isize
    }

    pub fn analyze(&self, x: &[f64]) -> Spectra {
        (0..self.n_frames(x.len()))
            .map(|t| {
                let start = self.frame_start(t);
                let mut buf: Vec<Complex64> = (0..self.n_fft)
                    .map(|n| {
                        let i = start + n as isize;
                        let s = if i >= 0 && (i as usize) < x.len() {
                            x[i as usize]
                        } else {
                            0.0
                        };
                        Complex64::new(s * self.window[n], 0.0)
                    })
                    .collect();
                self.forward.process(&mut buf);
                buf
            })
            .collect()
    }

    /// Least-squares signal estimate of length `len` whose STFT is closest to
    /// `spectra` (weighted overlap-add normalised by the summed squared window).
    pub fn synthesize(&self, spectra: &Spectra, len: usize) -> Vec<f64> {
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let scale = 1.0 / self.n_fft as f64;
        for (t, frame) in spectra.iter().enumerate() {
            let mut buf = frame.clone();
            self.inverse.process(&mut buf);
            let start = self.frame_start(t);
            for n in 0..self.n_fft {
                let i = start + n as isize;
                if i < 0 || i as usize >= len {
                    continue;
                }
                let w = self.window[n];
                num[i as usize] += w * buf[n].re * scale;
                den[i as usize] += w * w;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(&a, &d)| if d > 1e-12 { a / d } else { 0.0 })
            .collect()
    }

    pub fn magnitudes(spectra: &Spectra) -> Vec<Vec<f64>> {
        spectra
            .iter()
            .map(|f| f.iter().map(|c| c.norm()).collect())
            .collect()
    }
}

/// Frobenius distance between two magnitude grids of equal shape.
pub fn magnitude_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt()
}
