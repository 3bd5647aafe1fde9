/// Regression deltas `d_t = sum_k k (c_{t+k} - c_{t-k}) / (2 sum_k k^2)` with
/// edge frames replicated.
pub fn deltas(rows: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let dims = rows[0].len();
    let denom = 2.0 * (1..=window).map(|k| (k * k) as f64).sum::<f64>();
    (0..n)
        .map(|t| {
            (0..dims)
                .map(|d| {
                    (1..=window)
                        .map(|k| {
                            let ahead = rows[(t + k).min(n - 1)][d];
                            let behind = rows[t.saturating_sub(k)][d];
                            k as f64 * (ahead - behind)
                        })
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Appends delta and delta-delta columns: `[static | delta | delta-delta]`.
pub fn add_delta_features(statics: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let d1 = deltas(statics, window);
    let d2 = deltas(&d1, window);
    statics
        .iter()
        .zip(d1)
        .zip(d2)
        .map(|((s, a), b)| s.iter().copied().chain(a).chain(b).collect())
        .collect()
}
