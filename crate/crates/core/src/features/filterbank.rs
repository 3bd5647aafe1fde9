//! Triangular filterbanks on a linear or mel frequency axis.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterbankKind {
    Linear,
    Mel,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone)]
pub struct Filterbank {
    pub kind: FilterbankKind,
    /// `n_filters` rows of `fft_bins/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    /// `n_filters + 2` band edges in Hz; filter `m` spans `edges[m]..edges[m+2]`
    /// and peaks at `edges[m+1]`.
    pub edges_hz: Vec<f64>,
}

impl Filterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Filters with peaks equally spaced on the chosen axis between 0 Hz and
/// Nyquist. Weights are evaluated at each bin's exact frequency, so centers
/// are not snapped to bins. A filter narrower than one bin falls back to a
/// single unit weight at its nearest bin.
pub fn build_filterbank(kind: FilterbankKind, n_filters: usize, fft_bins: usize, sample_rate_hz: u32) -> Filterbank {
    assert!(n_filters >= 2, "need at least two filters");
    let nyquist = sample_rate_hz as f64 / 2.0;
    let (to_axis, from_axis): (fn(f64) -> f64, fn(f64) -> f64) = match kind {
        FilterbankKind::Linear => (|f| f, |f| f),
        FilterbankKind::Mel => (hz_to_mel, mel_to_hz),
    };
    let (lo, hi) = (to_axis(0.0), to_axis(nyquist));
    let edges_hz: Vec<f64> = (0..n_filters + 2)
        .map(|i| from_axis(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    let n_bins = fft_bins / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / fft_bins as f64;

    let weights = (0..n_filters)
        .map(|m| {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let mut row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect();
            if row.iter().all(|&w| w == 0.0) {
                let nearest = ((center / bin_hz).round() as usize).min(n_bins - 1);
                row[nearest] = 1.0;
            }
            row
        })
        .collect();
    Filterbank {
        kind,
        weights,
        edges_hz,
    }
}
