//! Residual fingerprint extractor.
//!
//! Layer order: 7x7 stem convolution (stride 2), 3x3 max pool (stride 2),
//! eight basic blocks, global average pooling, then a fully connected
//! classifier. The pooled vector in front of the classifier is the vocoder
//! fingerprint.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{BatchStats, BnStats, Tape, Var};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Widths grow per stage; stride 2 and a projection shortcut at each
    /// stage entry after the first.
    ResnetStaged,
    /// All eight blocks at 16 channels, no subsampling after the stem.
    ResnetFlat16,
    /// `ResnetStaged` with a squeeze-and-excitation gate before each
    /// residual addition.
    SeResnetStaged,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ResnetStaged => "resnet_staged",
            Variant::ResnetFlat16 => "resnet_flat16",
            Variant::SeResnetStaged => "se_resnet_staged",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet_staged" => Ok(Variant::ResnetStaged),
            "resnet_flat16" => Ok(Variant::ResnetFlat16),
            "se_resnet_staged" => Ok(Variant::SeResnetStaged),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub n_classes: usize,
    /// Feature dimensions (image height); frames are the image width.
    pub input_coeffs: usize,
    pub batch_norm: bool,
    pub se_reduction: usize,
    /// Standardize each input coefficient with stored mean and deviation.
    #[serde(default)]
    pub input_norm: bool,
}

impl ModelConfig {
    pub fn new(variant: Variant, n_classes: usize, input_coeffs: usize) -> Self {
        let stage_widths = match variant {
            Variant::ResnetFlat16 => vec![16; 4],
            _ => vec![16, 32, 64, 128],
        };
        ModelConfig {
            variant,
            stage_widths,
            blocks_per_stage: 2,
            n_classes,
            input_coeffs,
            batch_norm: true,
            se_reduction: 16,
            input_norm: true,
        }
    }

    pub fn total_blocks(&self) -> usize {
        self.stage_widths.len() * self.blocks_per_stage
    }

    pub fn fingerprint_dim(&self) -> usize {
        *self.stage_widths.last().unwrap_or(&0)
    }

    fn subsamples(&self) -> bool {
        self.variant != Variant::ResnetFlat16
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_classes < 2 {
            return fail(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.input_coeffs == 0 {
            return fail("input_coeffs must be positive".into());
        }
        if self.stage_widths.is_empty() || self.stage_widths.contains(&0) {
            return fail(format!("invalid stage widths {:?}", self.stage_widths));
        }
        if self.blocks_per_stage == 0 {
            return fail("blocks_per_stage must be positive".into());
        }
        if self.total_blocks() != 8 {
            return fail(format!(
                "the fingerprint extractor uses 8 basic blocks, config gives {} x {} = {}",
                self.stage_widths.len(),
                self.blocks_per_stage,
                self.total_blocks()
            ));
        }
        if self.variant == Variant::SeResnetStaged && self.se_reduction == 0 {
            return fail("se_reduction must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub tensor: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct Conv {
    pub weight: usize,
    pub bias: Option<usize>,
    pub stride: usize,
    pub pad: usize,
}

/// Indices of a batch-norm layer's affine parameters and running statistics.
#[derive(Debug, Clone, Copy)]
pub struct Norm {
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SeGate {
    pub reduce: Dense,
    pub expand: Dense,
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub conv1: Conv,
    pub bn1: Option<Norm>,
    pub conv2: Conv,
    pub bn2: Option<Norm>,
    /// 1x1 convolution (plus norm) matching channels and stride on the shortcut.
    pub projection: Option<(Conv, Option<Norm>)>,
    pub se: Option<SeGate>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
}

/// Collects named tensors while a network is being built.
pub struct ParamBuilder<'r, T> {
    pub params: Vec<NamedTensor<T>>,
    pub buffers: Vec<NamedTensor<T>>,
    batch_norm: bool,
    rng: &'r mut Rng,
}

impl<'r, T: Scalar> ParamBuilder<'r, T> {
    pub fn new(rng: &'r mut Rng, batch_norm: bool) -> Self {
        ParamBuilder {
            params: Vec::new(),
            buffers: Vec::new(),
            batch_norm,
            rng,
        }
    }

    fn param(&mut self, name: String, tensor: Tensor<T>) -> usize {
        self.params.push(NamedTensor { name, tensor });
        self.params.len() - 1
    }

    fn buffer(&mut self, name: String, tensor: Tensor<T>) -> usize {
        self.buffers.push(NamedTensor { name, tensor });
        self.buffers.len() - 1
    }

    /// Kaiming-normal weights (fan-in); a bias only when batch norm is off.
    fn conv(&mut self, name: &str, c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize) -> Conv {
        let fan_in = c_in * k * k;
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
        let data = (0..c_out * fan_in)
            .map(|_| T::from_f64(normal.sample(self.rng)))
            .collect();
        let weight = self.param(format!("{name}.weight"), Tensor::new(vec![c_out, c_in, k, k], data));
        let bias = (!self.batch_norm).then(|| self.param(format!("{name}.bias"), Tensor::zeros(&[c_out])));
        Conv {
            weight,
            bias,
            stride,
            pad,
        }
    }

    fn norm(&mut self, name: &str, c: usize) -> Option<Norm> {
        self.batch_norm.then(|| Norm {
            gamma: self.param(format!("{name}.weight"), Tensor::full(&[c], T::one())),
            beta: self.param(format!("{name}.bias"), Tensor::zeros(&[c])),
            running_mean: self.buffer(format!("{name}.running_mean"), Tensor::zeros(&[c])),
            running_var: self.buffer(format!("{name}.running_var"), Tensor::full(&[c], T::one())),
        })
    }

    fn dense(&mut self, name: &str, inp: usize, out: usize) -> Dense {
        let bound = 1.0 / (inp as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| T::from_f64(self.rng.random_range(-bound..bound)))
                .collect()
        };
        let w = draw(out * inp);
        let b = draw(out);
        Dense {
            weight: self.param(format!("{name}.weight"), Tensor::new(vec![out, inp], w)),
            bias: self.param(format!("{name}.bias"), Tensor::new(vec![out], b)),
        }
    }

    /// Registers a basic block's tensors under `prefix`.
    pub fn basic_block(
        &mut self,
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        se_reduction: Option<usize>,
    ) -> BasicBlock {
        let conv1 = self.conv(&format!("{prefix}.conv1"), in_channels, out_channels, 3, stride, 1);
        let bn1 = self.norm(&format!("{prefix}.bn1"), out_channels);
        let conv2 = self.conv(&format!("{prefix}.conv2"), out_channels, out_channels, 3, 1, 1);
        let bn2 = self.norm(&format!("{prefix}.bn2"), out_channels);
        let projection = (stride != 1 || in_channels != out_channels).then(|| {
            let c = self.conv(&format!("{prefix}.downsample.conv"), in_channels, out_channels, 1, stride, 0);
            (c, self.norm(&format!("{prefix}.downsample.bn"), out_channels))
        });
        let se = se_reduction.map(|r| {
            let hidden = (out_channels / r).max(1);
            SeGate {
                reduce: self.dense(&format!("{prefix}.se.reduce"), out_channels, hidden),
                expand: self.dense(&format!("{prefix}.se.expand"), hidden, out_channels),
            }
        });
        BasicBlock {
            conv1,
            bn1,
            conv2,
            bn2,
            projection,
            se,
            in_channels,
            out_channels,
            stride,
        }
    }
}

/// Per-forward state: the tape, bound parameter variables and running
/// statistics, plus batch statistics collected in training mode.
pub struct ForwardCtx<'a, T> {
    pub tape: &'a mut Tape<T>,
    pub params: &'a [Var],
    pub buffers: &'a [NamedTensor<T>],
    pub mode: Mode,
    pub bn_updates: Vec<(Norm, BatchStats<T>)>,
}

impl<'a, T: Scalar> ForwardCtx<'a, T> {
    pub fn new(tape: &'a mut Tape<T>, params: &'a [Var], buffers: &'a [NamedTensor<T>], mode: Mode) -> Self {
        ForwardCtx {
            tape,
            params,
            buffers,
            mode,
            bn_updates: Vec::new(),
        }
    }

    fn conv(&mut self, c: &Conv, x: Var) -> Result<Var> {
        self.tape.conv2d(
            x,
            self.params[c.weight],
            c.bias.map(|b| self.params[b]),
            c.stride,
            c.pad,
        )
    }

    fn norm(&mut self, n: Option<&Norm>, x: Var) -> Result<Var> {
        let Some(n) = n else { return Ok(x) };
        let stats = match self.mode {
            Mode::Train => BnStats::Batch,
            Mode::Eval => BnStats::Running {
                mean: self.buffers[n.running_mean].tensor.data(),
                var: self.buffers[n.running_var].tensor.data(),
            },
        };
        let (y, batch) = self
            .tape
            .batch_norm(x, self.params[n.gamma], self.params[n.beta], stats, BN_EPS)?;
        if let Some(b) = batch {
            self.bn_updates.push((*n, b));
        }
        Ok(y)
    }

    fn dense(&mut self, d: &Dense, x: Var) -> Result<Var> {
        self.tape
            .linear(x, self.params[d.weight], Some(self.params[d.bias]))
    }
}

impl BasicBlock {
    /// `relu(F(x) + shortcut(x))` with `F = bn2(conv2(relu(bn1(conv1(x)))))`,
    /// the shortcut being identity or the 1x1 projection. An SE gate, when
    /// present, rescales `F(x)` per channel before the addition.
    pub fn forward<T: Scalar>(&self, ctx: &mut ForwardCtx<'_, T>, x: Var) -> Result<Var> {
        let c_in = ctx.tape.shape(x).get(1).copied().unwrap_or(0);
        if c_in != self.in_channels {
            return Err(Error::Dimension(format!(
                "basic block expects {} input channels, got shape {:?}",
                self.in_channels,
                ctx.tape.shape(x)
            )));
        }
        let h = ctx.conv(&self.conv1, x)?;
        let h = ctx.norm(self.bn1.as_ref(), h)?;
        let h = ctx.tape.relu(h);
        let h = ctx.conv(&self.conv2, h)?;
        let mut h = ctx.norm(self.bn2.as_ref(), h)?;
        if let Some(se) = &self.se {
            let squeezed = ctx.tape.global_avg_pool(h)?;
            let z = ctx.dense(&se.reduce, squeezed)?;
            let z = ctx.tape.relu(z);
            let z = ctx.dense(&se.expand, z)?;
            let gates = ctx.tape.sigmoid(z);
            h = ctx.tape.scale_channels(h, gates)?;
        }
        let shortcut = match &self.projection {
            Some((conv, norm)) => {
                let s = ctx.conv(conv, x)?;
                ctx.norm(norm.as_ref(), s)?
            }
            None => x,
        };
        let sum = ctx.tape.add(h, shortcut)?;
        Ok(ctx.tape.relu(sum))
    }
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    params: Vec<NamedTensor<T>>,
    buffers: Vec<NamedTensor<T>>,
    /// Buffer indices of the per-coefficient input mean and deviation.
    input_norm: Option<(usize, usize)>,
    stem: Conv,
    stem_norm: Option<Norm>,
    blocks: Vec<BasicBlock>,
    classifier: Dense,
}

/// One row of [`Model::describe`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
}

impl<T: Scalar> Model<T> {
    /// Builds and initialises a model; all random draws come from `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, &[rng::tag::INIT]);
        let mut b = ParamBuilder::<T>::new(&mut rng, config.batch_norm);
        let input_norm = config.input_norm.then(|| {
            let d = config.input_coeffs;
            (
                b.buffer("input_norm.mean".into(), Tensor::zeros(&[d])),
                b.buffer("input_norm.std".into(), Tensor::full(&[d], T::one())),
            )
        });
        let w0 = config.stage_widths[0];
        let stem = b.conv("stem.conv", 1, w0, 7, 2, 3);
        let stem_norm = b.norm("stem.bn", w0);
        let se = (config.variant == Variant::SeResnetStaged).then_some(config.se_reduction);
        let mut blocks = Vec::new();
        let mut c_in = w0;
        for (s, &width) in config.stage_widths.iter().enumerate() {
            for i in 0..config.blocks_per_stage {
                let stride = if s > 0 && i == 0 && config.subsamples() { 2 } else { 1 };
                blocks.push(b.basic_block(&format!("layer{}.{i}", s + 1), c_in, width, stride, se));
                c_in = width;
            }
        }
        let classifier = b.dense("fc", c_in, config.n_classes);
        Ok(Model {
            config: config.clone(),
            params: b.params,
            buffers: b.buffers,
            input_norm,
            stem,
            stem_norm,
            blocks,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[NamedTensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [NamedTensor<T>] {
        &mut self.params
    }

    pub fn buffers(&self) -> &[NamedTensor<T>] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [NamedTensor<T>] {
        &mut self.buffers
    }

    pub fn blocks(&self) -> &[BasicBlock] {
        &self.blocks
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn describe(&self) -> Vec<ParamSummary> {
        self.params
            .iter()
            .map(|p| ParamSummary {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                count: p.tensor.len(),
            })
            .collect()
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.tensor.clone(), trainable))
            .collect()
    }

    /// Runs the network on `x: [N, 1, coeffs, frames]`.
    pub fn forward(&self, tape: &mut Tape<T>, params: &[Var], x: Var, mode: Mode) -> Result<(Var, Var, Vec<(Norm, BatchStats<T>)>)> {
        let xs = tape.shape(x).to_vec();
        if xs.len() != 4 || xs[1] != 1 || xs[2] != self.config.input_coeffs {
            return Err(Error::Dimension(format!(
                "model expects input [N, 1, {}, frames], got {xs:?}",
                self.config.input_coeffs
            )));
        }
        let x = match self.input_norm {
            Some((mean, std)) => {
                let (mean, std) = (self.buffers[mean].tensor.data(), self.buffers[std].tensor.data());
                let frames = xs[3];
                let mut v = tape.value(x).clone();
                for (i, row) in v.data_mut().chunks_mut(frames).enumerate() {
                    let d = i % xs[2];
                    row.iter_mut().for_each(|e| *e = (*e - mean[d]) / std[d]);
                }
                tape.leaf(v, false)
            }
            None => x,
        };
        let mut ctx = ForwardCtx::new(tape, params, &self.buffers, mode);
        let h = ctx.conv(&self.stem, x)?;
        let h = ctx.norm(self.stem_norm.as_ref(), h)?;
        let h = ctx.tape.relu(h);
        let mut h = ctx.tape.max_pool2d(h, 3, 2, 1)?;
        for block in &self.blocks {
            h = block.forward(&mut ctx, h)?;
        }
        let fingerprint = ctx.tape.global_avg_pool(h)?;
        let logits = ctx.dense(&self.classifier, fingerprint)?;
        Ok((logits, fingerprint, ctx.bn_updates))
    }

    /// Sets the input standardization; a no-op for models built without it.
    /// Deviations are floored at `1e-6`.
    pub fn set_input_norm(&mut self, mean: &[f64], std: &[f64]) -> Result<()> {
        let Some((m, s)) = self.input_norm else { return Ok(()) };
        let d = self.config.input_coeffs;
        if mean.len() != d || std.len() != d {
            return Err(Error::Dimension(format!(
                "input normalization needs {d} values, got {} means and {} deviations",
                mean.len(),
                std.len()
            )));
        }
        for (dst, &v) in self.buffers[m].tensor.data_mut().iter_mut().zip(mean) {
            *dst = T::from_f64(v);
        }
        for (dst, &v) in self.buffers[s].tensor.data_mut().iter_mut().zip(std) {
            *dst = T::from_f64(v.max(1e-6));
        }
        Ok(())
    }

    /// Folds training-mode batch statistics into the running averages.
    pub fn apply_bn_updates(&mut self, updates: &[(Norm, BatchStats<T>)]) {
        let m = T::from_f64(BN_MOMENTUM);
        let keep = T::one() - m;
        for (norm, stats) in updates {
            for (r, &b) in self.buffers[norm.running_mean]
                .tensor
                .data_mut()
                .iter_mut()
                .zip(&stats.mean)
            {
                *r = keep * *r + m * b;
            }
            for (r, &b) in self.buffers[norm.running_var]
                .tensor
                .data_mut()
                .iter_mut()
                .zip(&stats.var_unbiased)
            {
                *r = keep * *r + m * b;
            }
        }
    }

    /// Inference-mode logits `[N, C]` and fingerprints `[N, D]`.
    pub fn infer(&self, input: Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut tape = Tape::inference();
        let params = self.bind(&mut tape, false);
        let x = tape.leaf(input, false);
        let (logits, fp, _) = self.forward(&mut tape, &params, x, Mode::Eval)?;
        Ok((tape.value(logits).clone(), tape.value(fp).clone()))
    }

    pub fn classifier(&self) -> (&Tensor<T>, &Tensor<T>) {
        (
            &self.params[self.classifier.weight].tensor,
            &self.params[self.classifier.bias].tensor,
        )
    }

    /// Overwrites parameters and buffers from `(name, tensor)` pairs. Every
    /// tensor the model owns must be present with a matching shape.
    pub fn load_tensors<'t>(&mut self, lookup: impl Fn(&str) -> Option<&'t Tensor<f32>>) -> Result<()> {
        for item in self.params.iter_mut().chain(self.buffers.iter_mut()) {
            let src = lookup(&item.name).ok_or_else(|| {
                Error::Checkpoint(format!("tensor `{}` missing from checkpoint", item.name))
            })?;
            if src.shape() != item.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for tensor `{}`: checkpoint has {:?}, model expects {:?}",
                    item.name,
                    src.shape(),
                    item.tensor.shape()
                )));
            }
            item.tensor = src.cast();
        }
        Ok(())
    }
}

/// Image layout for a batch of feature matrices, all with `frames` rows:
/// `[N, 1, dims, frames]`.
pub fn features_to_input<T: Scalar>(mats: &[&crate::features::FeatureMatrix]) -> Result<Tensor<T>> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Data("empty batch".into()))?;
    let (frames, dims) = (first.frames, first.dims);
    let mut data = Vec::with_capacity(mats.len() * frames * dims);
    for m in mats {
        if m.frames != frames || m.dims != dims {
            return Err(Error::Dimension(format!(
                "batch mixes {}x{} with {frames}x{dims} feature matrices",
                m.frames, m.dims
            )));
        }
        for d in 0..dims {
            data.extend((0..frames).map(|t| T::from_f64(m.values[t * dims + d] as f64)));
        }
    }
    Ok(Tensor::new(vec![mats.len(), 1, dims, frames], data))
}
