use super::filterbank::Filterbank;

/// Orthonormal DCT-II as an explicit matrix (filterbank sizes are small).
#[derive(Debug, Clone)]
pub struct Dct {
    n: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                basis[k * n + i] =
                    scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            }
        }
        Dct { n, basis }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First `n_out` coefficients of the transform of `x`.
    pub fn forward(&self, x: &[f64], n_out: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..n_out.min(self.n))
            .map(|k| {
                self.basis[k * self.n..(k + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(b, v)| b * v)
                    .sum()
            })
            .collect()
    }

    /// Transpose of the basis (DCT-III); missing trailing coefficients count as zero.
    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                c.iter()
                    .enumerate()
                    .map(|(k, &ck)| ck * self.basis[k * self.n + i])
                    .sum()
            })
            .collect()
    }
}

/// `DCT(ln(max(fb . power, log_floor)))` truncated to `n_cepstra` (c0 kept).
pub fn cepstra(power: &[f64], fb: &Filterbank, dct: &Dct, n_cepstra: usize, log_floor: f64) -> Vec<f64> {
    let log_energy: Vec<f64> = fb
        .apply(power)
        .into_iter()
        .map(|e| e.max(log_floor).ln())
        .collect();
    dct.forward(&log_energy, n_cepstra)
}
