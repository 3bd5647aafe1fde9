#![allow(dead_code)]

pub mod dsp_suite;
pub mod gl_suite;
pub mod grad_suite;
pub mod metrics_suite;
pub mod optim_suite;

use rand::Rng as _;
use vocoder_fingerprint::nnet::{Tape, Tensor, Var};
use vocoder_fingerprint::rng;
use vocoder_fingerprint::Result;

pub const FD_EPS: f64 = 1e-4;

/// Random tensor with entries uniform in `[-1, 1)`.
pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = rng::stream(seed, &[99]);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect())
}

/// Same, but every entry has magnitude at least `margin`, keeping the
/// values away from a ReLU kink.
pub fn rand_tensor_away_from_zero(shape: &[usize], seed: u64, margin: f64) -> Tensor<f64> {
    let mut t = rand_tensor(shape, seed);
    for v in t.data_mut() {
        *v = v.signum() * (margin + v.abs());
    }
    t
}

/// Distance of the nearest ReLU input from its kink for `f(inputs)`.
pub fn relu_margin<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::inference();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
    f(&mut tape, &vars).expect("forward");
    tape.relu_margin().unwrap_or(f64::INFINITY)
}

/// Compares tape gradients against central finite differences of the
/// scalar `sum(r * f(inputs))` for a fixed random `r`. Returns the
/// norm-wise relative error `|g - g_fd| / max(|g|, |g_fd|)` per input.
pub fn grad_check<F>(inputs: &[Tensor<f64>], f: F, seed: u64) -> Vec<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let out_len = {
        let mut tape = Tape::inference();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = f(&mut tape, &vars).expect("forward");
        tape.value(out).len()
    };
    let weights = rand_tensor(&[out_len], seed ^ 0xabcd).into_data();

    let objective = |inputs: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::inference();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = f(&mut tape, &vars).expect("forward");
        tape.value(out)
            .data()
            .iter()
            .zip(&weights)
            .map(|(a, b)| a * b)
            .sum()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &vars).expect("forward");
    let loss = tape.weighted_sum(out, &weights).expect("weighted sum");
    tape.backward(loss).expect("backward");

    let mut errors = Vec::new();
    for (i, var) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*var)
            .map(|g| g.into_data())
            .unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        let mut numeric = vec![0.0; inputs[i].len()];
        let mut work = inputs.to_vec();
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + FD_EPS;
            let up = objective(&work);
            work[i].data_mut()[j] = x0 - FD_EPS;
            let down = objective(&work);
            work[i].data_mut()[j] = x0;
            numeric[j] = (up - down) / (2.0 * FD_EPS);
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        errors.push(if scale == 0.0 { 0.0 } else { diff / scale });
    }
    errors
}
