//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::nnet::model::NamedTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of completed steps.
    pub t: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(params: &[NamedTensor<f32>], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
        }
    }

    /// One update at learning rate `lr`. Gradients are checked before any
    /// parameter changes; a non-finite entry aborts the step and names the
    /// parameter.
    pub fn step(&mut self, params: &mut [NamedTensor<f32>], grads: &[Vec<f32>], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Dimension(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if g.len() != p.tensor.len() {
                return Err(Error::Dimension(format!(
                    "gradient for `{}` has {} values, parameter has shape {:?}",
                    p.name,
                    g.len(),
                    p.tensor.shape()
                )));
            }
            if let Some(index) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    name: p.name.clone(),
                    index,
                });
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((w, &g), m), v) in p.tensor.data_mut().iter_mut().zip(g).zip(m).zip(v) {
                let g = g as f64;
                let mn = b1 * *m as f64 + (1.0 - b1) * g;
                let vn = b2 * *v as f64 + (1.0 - b2) * g * g;
                *m = mn as f32;
                *v = vn as f32;
                let update = lr * (mn / c1) / ((vn / c2).sqrt() + self.epsilon);
                *w = (*w as f64 - update) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::Tensor;

    fn scalar_param(v: f32) -> Vec<NamedTensor<f32>> {
        vec![NamedTensor {
            name: "w".into(),
            tensor: Tensor::new(vec![1], vec![v]),
        }]
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        let mut p = scalar_param(0.5);
        let mut opt = Adam::new(&p, 0.9, 0.98, 1e-8);
        opt.step(&mut p, &[vec![1.0]], 1e-3).unwrap();
        let expected = 0.5f64 - 1e-3 / (1.0 + 1e-8);
        assert!((p[0].tensor.data()[0] as f64 - expected).abs() < 1e-7);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = scalar_param(2.0);
        let mut opt = Adam::new(&p, 0.9, 0.98, 1e-8);
        opt.step(&mut p, &[vec![1.0]], 1e-3).unwrap();
        let before = p[0].tensor.data()[0];
        let (m1, v1) = (opt.m[0][0], opt.v[0][0]);
        let mut q = scalar_param(before);
        let mut fresh = Adam::new(&q, 0.9, 0.98, 1e-8);
        fresh.step(&mut q, &[vec![0.0]], 1e-3).unwrap();
        assert_eq!(q[0].tensor.data()[0], before);
        opt.step(&mut p, &[vec![0.0]], 0.0).unwrap();
        assert!(opt.m[0][0] < m1 && opt.v[0][0] < v1);
        assert_eq!(p[0].tensor.data()[0], before);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar_param(1.0);
        let mut opt = Adam::new(&p, 0.9, 0.98, 1e-8);
        let err = opt.step(&mut p, &[vec![f32::NAN]], 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref name, index: 0 } if name == "w"));
        assert_eq!(p[0].tensor.data()[0], 1.0);
        assert_eq!(opt.t, 0);
    }
}
