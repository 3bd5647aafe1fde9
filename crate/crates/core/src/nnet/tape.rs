//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. [`Tape::backward`] walks the nodes in reverse
//! and accumulates gradients into every node that requires one.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }
}

/// `floor((len + 2 pad - k) / stride) + 1`, or `None` when the kernel does not fit.
pub fn conv_out_len(len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    (len + 2 * pad >= k).then(|| (len + 2 * pad - k) / stride + 1)
}

/// Batch-norm statistics source.
#[derive(Debug, Clone, Copy)]
pub enum BnStats<'a, T> {
    /// Normalise with the batch's own mean and variance.
    Batch,
    /// Normalise with stored running statistics.
    Running { mean: &'a [T], var: &'a [T] },
}

/// Batch statistics produced by a training-mode batch norm: per-channel mean
/// and unbiased variance, for updating running averages.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var_unbiased: Vec<T>,
}

enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        g: ConvGeom,
        cols: Vec<T>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch: bool,
    },
    Relu(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Add(Var, Var),
    Sigmoid(Var),
    ScaleChannels {
        x: Var,
        s: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
    WeightedSum {
        x: Var,
        weights: Vec<T>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    record: bool,
}

fn dim_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    /// A tape that records everything needed for `backward`.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            record: true,
        }
    }

    /// A forward-only tape; `backward` is unavailable.
    pub fn inference() -> Self {
        Tape {
            record: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, inputs: &[Var], op: Op<T>) -> Var {
        let requires_grad = self.record && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad: requires_grad && self.record,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient after [`Tape::backward`]; `None` if nothing flowed into `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        self.grads
            .get(v.0)
            .and_then(|g| g.as_ref())
            .map(|g| Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()))
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    /// Smallest `|x|` over all ReLU inputs recorded so far, or `None` if the
    /// tape holds no ReLU. Finite differences are only meaningful when this
    /// exceeds the perturbation.
    pub fn relu_margin(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .map(|x| {
                self.value(x)
                    .data()
                    .iter()
                    .fold(f64::INFINITY, |m, v| m.min(v.as_f64().abs()))
            })
            .reduce(f64::min)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || stride == 0 {
            return Err(dim_err("conv2d", &xs, &ws));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(dim_err("conv2d bias", self.shape(b), &ws));
            }
        }
        let (ho, wo) = match (
            conv_out_len(xs[2], ws[2], stride, pad),
            conv_out_len(xs[3], ws[3], stride, pad),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(dim_err("conv2d (kernel larger than padded input)", &xs, &ws)),
        };
        let g = ConvGeom {
            n: xs[0],
            c_in: xs[1],
            h: xs[2],
            w: xs[3],
            c_out: ws[0],
            kh: ws[2],
            kw: ws[3],
            stride,
            pad,
            ho,
            wo,
        };
        let (k, p) = (g.k(), g.p());
        let keep_cols = self.record && self.needs(w);
        let mut out = vec![T::zero(); g.n * g.c_out * p];
        let mut all_cols = if keep_cols {
            vec![T::zero(); g.n * k * p]
        } else {
            Vec::new()
        };
        let mut scratch = vec![T::zero(); if keep_cols { 0 } else { k * p }];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            let bv = b.map(|b| self.value(b).data());
            for n in 0..g.n {
                let cols = if keep_cols {
                    &mut all_cols[n * k * p..(n + 1) * k * p]
                } else {
                    &mut scratch[..]
                };
                im2col(&xv[n * g.c_in * g.h * g.w..(n + 1) * g.c_in * g.h * g.w], &g, cols);
                let y = &mut out[n * g.c_out * p..(n + 1) * g.c_out * p];
                if let Some(bv) = bv {
                    for (o, row) in y.chunks_mut(p).enumerate() {
                        row.iter_mut().for_each(|v| *v = bv[o]);
                    }
                }
                let beta = if bv.is_some() { T::one() } else { T::zero() };
                T::gemm(g.c_out, k, p, T::one(), wv, k as isize, 1, cols, p as isize, 1, beta, y, p as isize, 1);
            }
        }
        let value = Tensor::new(vec![g.n, g.c_out, ho, wo], out);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(
            value,
            &inputs,
            Op::Conv2d {
                x,
                w,
                b,
                g,
                cols: all_cols,
            },
        ))
    }

    /// Per-channel batch normalization over `(N, H, W)` of an NCHW tensor.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: BnStats<'_, T>,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || self.shape(gamma) != [xs[1]] || self.shape(beta) != [xs[1]] {
            return Err(dim_err("batch_norm", &xs, self.shape(gamma)));
        }
        let (n, c, hw) = (xs[0], xs[1], xs[2] * xs[3]);
        let m = n * hw;
        let eps = T::from_f64(eps);
        let xv = self.value(x).data();
        let (mean, var, batch_stats) = match stats {
            BnStats::Batch => {
                if m < 2 {
                    return Err(Error::Dimension(format!(
                        "batch_norm: batch statistics need more than one value per channel, shape {xs:?}"
                    )));
                }
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ch in 0..c {
                    let mut s = 0.0f64;
                    for b in 0..n {
                        s += xv[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                            .iter()
                            .map(|v| v.as_f64())
                            .sum::<f64>();
                    }
                    let mu = s / m as f64;
                    let mut ss = 0.0f64;
                    for b in 0..n {
                        ss += xv[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                            .iter()
                            .map(|v| (v.as_f64() - mu).powi(2))
                            .sum::<f64>();
                    }
                    mean[ch] = T::from_f64(mu);
                    var[ch] = T::from_f64(ss / m as f64);
                }
                let unbiased = var
                    .iter()
                    .map(|&v| v * T::from_f64(m as f64 / (m - 1) as f64))
                    .collect();
                let bs = BatchStats {
                    mean: mean.clone(),
                    var_unbiased: unbiased,
                };
                (mean, var, Some(bs))
            }
            BnStats::Running { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(dim_err("batch_norm running stats", &xs, &[mean.len()]));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let mut xhat = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * hw;
                for i in off..off + hw {
                    let h = (xv[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = h;
                    out[i] = gv[ch] * h + bv[ch];
                }
            }
        }
        let batch = batch_stats.is_some();
        let value = Tensor::new(xs, out);
        if !self.record {
            xhat = Vec::new();
        }
        let v = self.push(
            value,
            &[x, gamma, beta],
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch,
            },
        );
        Ok((v, batch_stats))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        let value = Tensor::new(
            value.shape().to_vec(),
            value.into_data().into_iter().map(|v| v.max(T::zero())).collect(),
        );
        self.push(value, &[x], Op::Relu(x))
    }

    /// Max pooling with implicit `-inf` padding.
    pub fn max_pool2d(&mut self, x: Var, k: usize, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || pad >= k || stride == 0 {
            return Err(dim_err("max_pool2d", &xs, &[k, stride, pad]));
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (ho, wo) = match (conv_out_len(h, k, stride, pad), conv_out_len(w, k, stride, pad)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(dim_err("max_pool2d (window larger than padded input)", &xs, &[k])),
        };
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(n * c * ho * wo);
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best = T::neg_infinity();
                    let mut best_i = usize::MAX;
                    for ki in 0..k {
                        let ih = (oh * stride + ki) as isize - pad as isize;
                        if ih < 0 || ih as usize >= h {
                            continue;
                        }
                        for kj in 0..k {
                            let iw = (ow * stride + kj) as isize - pad as isize;
                            if iw < 0 || iw as usize >= w {
                                continue;
                            }
                            let i = base + ih as usize * w + iw as usize;
                            if best_i == usize::MAX || xv[i] > best {
                                best = xv[i];
                                best_i = i;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_i);
                }
            }
        }
        let value = Tensor::new(vec![n, c, ho, wo], out);
        Ok(self.push(value, &[x], Op::MaxPool { x, argmax }))
    }

    /// `[N, C, H, W] -> [N, C]` mean over the spatial axes.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || xs[2] * xs[3] == 0 {
            return Err(dim_err("global_avg_pool", &xs, &[]));
        }
        let hw = xs[2] * xs[3];
        let inv = T::from_f64(1.0 / hw as f64);
        let out = self
            .value(x)
            .data()
            .chunks(hw)
            .map(|p| p.iter().copied().sum::<T>() * inv)
            .collect();
        let value = Tensor::new(vec![xs[0], xs[1]], out);
        Ok(self.push(value, &[x], Op::GlobalAvgPool(x)))
    }

    /// `y = x W^T + b` for `x: [N, in]`, `W: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(dim_err("linear", &xs, &ws));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(dim_err("linear bias", self.shape(b), &ws));
            }
        }
        let (n, inp, outp) = (xs[0], xs[1], ws[0]);
        let mut out = vec![T::zero(); n * outp];
        if let Some(b) = b {
            let bv = self.value(b).data();
            for row in out.chunks_mut(outp) {
                row.copy_from_slice(bv);
            }
        }
        T::gemm(
            n,
            inp,
            outp,
            T::one(),
            self.value(x).data(),
            inp as isize,
            1,
            self.value(w).data(),
            1,
            inp as isize,
            T::one(),
            &mut out,
            outp as isize,
            1,
        );
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(Tensor::new(vec![n, outp], out), &inputs, Op::Linear { x, w, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err("add", self.shape(a), self.shape(b)));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x + *y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data);
        Ok(self.push(value, &[a, b], Op::Add(a, b)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| T::one() / (T::one() + (-v).exp()))
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data);
        self.push(value, &[x], Op::Sigmoid(x))
    }

    /// Multiplies each `[H, W]` plane of `x: [N, C, H, W]` by `s[n, c]`.
    pub fn scale_channels(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xs, ss) = (self.shape(x).to_vec(), self.shape(s).to_vec());
        if xs.len() != 4 || ss != [xs[0], xs[1]] {
            return Err(dim_err("scale_channels", &xs, &ss));
        }
        let hw = xs[2] * xs[3];
        let sv = self.value(s).data();
        let data = self
            .value(x)
            .data()
            .chunks(hw)
            .zip(sv)
            .flat_map(|(plane, &g)| plane.iter().map(move |&v| v * g))
            .collect();
        Ok(self.push(Tensor::new(xs, data), &[x, s], Op::ScaleChannels { x, s }))
    }

    /// Mean softmax cross-entropy of `logits: [N, C]` against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let ls = self.shape(logits).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() {
            return Err(dim_err("softmax_cross_entropy", &ls, &[labels.len()]));
        }
        let c = ls[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Data(format!("label {bad} out of range for {c} classes")));
        }
        let mut probs = Vec::with_capacity(ls[0] * c);
        let mut loss = 0.0f64;
        for (row, &label) in self.value(logits).data().chunks(c).zip(labels) {
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v)).as_f64();
            let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            loss += z.ln() + max - row[label].as_f64();
            probs.extend(exps.iter().map(|e| T::from_f64(e / z)));
        }
        let value = Tensor::scalar(T::from_f64(loss / labels.len() as f64));
        Ok(self.push(
            value,
            &[logits],
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// `sum_i x_i w_i` for a fixed weight vector; reduces any tensor to a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: &[T]) -> Result<Var> {
        if self.value(x).len() != weights.len() {
            return Err(dim_err("weighted_sum", self.shape(x), &[weights.len()]));
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(weights)
            .map(|(a, b)| a.as_f64() * b.as_f64())
            .sum::<f64>();
        Ok(self.push(
            Tensor::scalar(T::from_f64(s)),
            &[x],
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
        ))
    }

    /// Backpropagates from the scalar `root`.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if !self.record {
            return Err(Error::Config("backward on an inference tape".into()));
        }
        if self.value(root).len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, dy: &[T], grads: &mut [Option<Vec<T>>]) {
        let len = |v: Var| self.nodes[v.0].value.len();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, g, cols } => {
                let (k, p) = (g.k(), g.p());
                let wv = self.value(*w).data();
                if self.needs(*w) {
                    let dw = accumulate(grads, *w, len(*w));
                    for n in 0..g.n {
                        let dyn_ = &dy[n * g.c_out * p..(n + 1) * g.c_out * p];
                        let cn = &cols[n * k * p..(n + 1) * k * p];
                        T::gemm(g.c_out, p, k, T::one(), dyn_, p as isize, 1, cn, 1, p as isize, T::one(), dw, k as isize, 1);
                    }
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let db = accumulate(grads, *b, len(*b));
                        for n in 0..g.n {
                            for (o, row) in dy[n * g.c_out * p..(n + 1) * g.c_out * p].chunks(p).enumerate() {
                                db[o] += row.iter().copied().sum::<T>();
                            }
                        }
                    }
                }
                if self.needs(*x) {
                    let mut dcols = vec![T::zero(); k * p];
                    let plane = g.c_in * g.h * g.w;
                    let dx = accumulate(grads, *x, len(*x));
                    for n in 0..g.n {
                        let dyn_ = &dy[n * g.c_out * p..(n + 1) * g.c_out * p];
                        T::gemm(k, g.c_out, p, T::one(), wv, 1, k as isize, dyn_, p as isize, 1, T::zero(), &mut dcols, p as isize, 1);
                        col2im(&dcols, g, &mut dx[n * plane..(n + 1) * plane]);
                    }
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch,
            } => {
                let xs = self.shape(*x);
                let (n, c, hw) = (xs[0], xs[1], xs[2] * xs[3]);
                let m = T::from_f64((n * hw) as f64);
                let gv = self.value(*gamma).data();
                let mut sum_dy = vec![T::zero(); c];
                let mut sum_dy_xhat = vec![T::zero(); c];
                for b in 0..n {
                    for ch in 0..c {
                        let off = (b * c + ch) * hw;
                        for j in off..off + hw {
                            sum_dy[ch] += dy[j];
                            sum_dy_xhat[ch] += dy[j] * xhat[j];
                        }
                    }
                }
                if self.needs(*gamma) {
                    let dg = accumulate(grads, *gamma, c);
                    dg.iter_mut().zip(&sum_dy_xhat).for_each(|(d, s)| *d += *s);
                }
                if self.needs(*beta) {
                    let db = accumulate(grads, *beta, c);
                    db.iter_mut().zip(&sum_dy).for_each(|(d, s)| *d += *s);
                }
                if self.needs(*x) {
                    let dx = accumulate(grads, *x, n * c * hw);
                    for b in 0..n {
                        for ch in 0..c {
                            let off = (b * c + ch) * hw;
                            let scale = gv[ch] * inv_std[ch];
                            for j in off..off + hw {
                                dx[j] += if *batch {
                                    scale * (dy[j] - (sum_dy[ch] + xhat[j] * sum_dy_xhat[ch]) / m)
                                } else {
                                    scale * dy[j]
                                };
                            }
                        }
                    }
                }
            }
            Op::Relu(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x).data();
                    let dx = accumulate(grads, *x, xv.len());
                    for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(xv) {
                        if v > T::zero() {
                            *d += g;
                        }
                    }
                }
            }
            Op::MaxPool { x, argmax } => {
                if self.needs(*x) {
                    let dx = accumulate(grads, *x, len(*x));
                    for (&src, &g) in argmax.iter().zip(dy) {
                        dx[src] += g;
                    }
                }
            }
            Op::GlobalAvgPool(x) => {
                if self.needs(*x) {
                    let xs = self.shape(*x);
                    let hw = xs[2] * xs[3];
                    let inv = T::from_f64(1.0 / hw as f64);
                    let dx = accumulate(grads, *x, len(*x));
                    for (plane, &g) in dx.chunks_mut(hw).zip(dy) {
                        plane.iter_mut().for_each(|d| *d += g * inv);
                    }
                }
            }
            Op::Linear { x, w, b } => {
                let (n, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                let outp = self.shape(*w)[0];
                if self.needs(*x) {
                    let dx = accumulate(grads, *x, n * inp);
                    T::gemm(n, outp, inp, T::one(), dy, outp as isize, 1, self.value(*w).data(), inp as isize, 1, T::one(), dx, inp as isize, 1);
                }
                if self.needs(*w) {
                    let dw = accumulate(grads, *w, outp * inp);
                    T::gemm(outp, n, inp, T::one(), dy, 1, outp as isize, self.value(*x).data(), inp as isize, 1, T::one(), dw, inp as isize, 1);
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let db = accumulate(grads, *b, outp);
                        for row in dy.chunks(outp) {
                            db.iter_mut().zip(row).for_each(|(d, g)| *d += *g);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        let d = accumulate(grads, v, dy.len());
                        d.iter_mut().zip(dy).for_each(|(d, g)| *d += *g);
                    }
                }
            }
            Op::Sigmoid(x) => {
                if self.needs(*x) {
                    let y = self.nodes[i].value.data();
                    let dx = accumulate(grads, *x, y.len());
                    for ((d, &g), &s) in dx.iter_mut().zip(dy).zip(y) {
                        *d += g * s * (T::one() - s);
                    }
                }
            }
            Op::ScaleChannels { x, s } => {
                let xs = self.shape(*x);
                let hw = xs[2] * xs[3];
                if self.needs(*x) {
                    let sv = self.value(*s).data();
                    let dx = accumulate(grads, *x, len(*x));
                    for ((plane, g), &sc) in dx.chunks_mut(hw).zip(dy.chunks(hw)).zip(sv) {
                        plane.iter_mut().zip(g).for_each(|(d, g)| *d += *g * sc);
                    }
                }
                if self.needs(*s) {
                    let xv = self.value(*x).data();
                    let ds = accumulate(grads, *s, len(*s));
                    for ((d, g), xp) in ds.iter_mut().zip(dy.chunks(hw)).zip(xv.chunks(hw)) {
                        *d += g.iter().zip(xp).map(|(a, b)| *a * *b).sum::<T>();
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                if self.needs(*logits) {
                    let c = self.shape(*logits)[1];
                    let scale = dy[0] / T::from_f64(labels.len() as f64);
                    let dl = accumulate(grads, *logits, probs.len());
                    for (r, &label) in labels.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == label { T::one() } else { T::zero() };
                            dl[r * c + j] += (probs[r * c + j] - onehot) * scale;
                        }
                    }
                }
            }
            Op::WeightedSum { x, weights } => {
                if self.needs(*x) {
                    let dx = accumulate(grads, *x, weights.len());
                    dx.iter_mut().zip(weights).for_each(|(d, w)| *d += *w * dy[0]);
                }
            }
        }
    }
}

/// Unfolds one `[C, H, W]` image into `[C*kh*kw, Ho*Wo]` patch columns.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let p = g.p();
    for c in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oh in 0..g.ho {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oh * g.wo..(oh + 1) * g.wo];
                    if ih < 0 || ih as usize >= g.h {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &x[(c * g.h + ih as usize) * g.w..(c * g.h + ih as usize + 1) * g.w];
                    for (ow, v) in line.iter_mut().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        *v = if iw < 0 || iw as usize >= g.w {
                            T::zero()
                        } else {
                            src[iw as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-column gradients back onto the image.
fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.p();
    for c in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oh in 0..g.ho {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    if ih < 0 || ih as usize >= g.h {
                        continue;
                    }
                    let base = (c * g.h + ih as usize) * g.w;
                    for ow in 0..g.wo {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        if iw >= 0 && (iw as usize) < g.w {
                            dx[base + iw as usize] += src[oh * g.wo + ow];
                        }
                    }
                }
            }
        }
    }
}
