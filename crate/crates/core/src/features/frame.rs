use super::FeatureConfig;
use crate::corpus::Waveform;
use crate::error::{Error, Result};

/// `y[n] = x[n] - alpha * x[n-1]`, with `y[0] = x[0]`.
pub fn pre_emphasize(x: &[f64], alpha: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first);
    }
    y.extend(x.windows(2).map(|p| p[1] - alpha * p[0]));
    y
}

/// `floor((n - win) / hop) + 1`, or 0 when the signal is shorter than a window.
pub fn frame_count(n: usize, win: usize, hop: usize) -> usize {
    if n < win {
        0
    } else {
        (n - win) / hop + 1
    }
}

/// `0.54 - 0.46 cos(2 pi n / (len - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Pre-emphasis, then Hamming-windowed frames at the configured hop. The last
/// partial frame is dropped.
pub fn frame_signal(w: &Waveform, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    if w.len() < win {
        return Err(Error::Length(format!(
            "need at least {win} samples for one frame, got {}",
            w.len()
        )));
    }
    let y = pre_emphasize(w.samples(), cfg.pre_emphasis);
    let window = hamming(win);
    Ok((0..frame_count(y.len(), win, hop))
        .map(|t| {
            y[t * hop..t * hop + win]
                .iter()
                .zip(&window)
                .map(|(s, h)| s * h)
                .collect()
        })
        .collect())
}
