//! Training loop: Adam with linear learning-rate decay, seeded crop
//! batching, per-epoch dev evaluation and best-dev model selection.

pub mod adam;
pub mod batch;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, LabeledSet};
use crate::features::FeatureMatrix;
use crate::nnet::model::Mode;
use crate::nnet::{Checkpoint, Model, ModelConfig, Tape, TrainerState};

pub use adam::Adam;
pub use batch::{crop_or_pad, epoch_order, make_batches, Batch};

/// Shortest crop accepted for training.
pub const MIN_CROP_FRAMES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub crop_frames: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.001,
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 30,
            crop_frames: 300,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return fail(format!("lr0 must be finite and >= 0, got {}", self.lr0));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return fail("batch_size and epochs must be >= 1".into());
        }
        if self.crop_frames < MIN_CROP_FRAMES {
            return fail(format!(
                "crop_frames must be >= {MIN_CROP_FRAMES}, got {}",
                self.crop_frames
            ));
        }
        Ok(())
    }
}

/// `lr0 * (1 - step / total_steps)`, never below 0.
pub fn lr_schedule(step: u64, total_steps: u64, lr0: f64) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    (lr0 * (1.0 - step as f64 / total_steps as f64)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev_macro_f1: f64,
    pub lr: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} dev_macro_f1={:.6} lr={:.8}",
            self.epoch, self.loss, self.dev_macro_f1, self.lr
        )
    }
}

/// Model plus optimiser, stepping along a fixed-length schedule.
pub struct Trainer {
    model: Model<f32>,
    adam: Adam,
    lr0: f64,
    step: u64,
    total_steps: u64,
}

impl Trainer {
    pub fn new(model_config: &ModelConfig, cfg: &TrainConfig, total_steps: u64) -> Result<Self> {
        cfg.validate()?;
        let model = Model::new(model_config, cfg.seed)?;
        let adam = Adam::new(model.params(), cfg.beta1, cfg.beta2, cfg.epsilon);
        Ok(Trainer {
            model,
            adam,
            lr0: cfg.lr0,
            step: 0,
            total_steps,
        })
    }

    pub fn model_mut(&mut self) -> &mut Model<f32> {
        &mut self.model
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn into_model(self) -> Model<f32> {
        self.model
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.step, self.total_steps, self.lr0)
    }

    /// Forward, backward and one Adam update; returns the batch loss
    /// measured before the update.
    pub fn train_step(&mut self, batch: &Batch) -> Result<f64> {
        let mut tape = Tape::new();
        let params = self.model.bind(&mut tape, true);
        let x = tape.leaf(batch.input.clone(), false);
        let (logits, _, bn_updates) = self.model.forward(&mut tape, &params, x, Mode::Train)?;
        let loss_var = tape.softmax_cross_entropy(logits, &batch.labels)?;
        let loss = tape.value(loss_var).item() as f64;
        if !loss.is_finite() {
            return Err(Error::Data(format!("non-finite training loss {loss}")));
        }
        tape.backward(loss_var)?;
        let grads: Vec<Vec<f32>> = params
            .iter()
            .zip(self.model.params())
            .map(|(&v, p)| tape.take_grad(v).unwrap_or_else(|| vec![0.0; p.tensor.len()]))
            .collect();
        let lr = self.current_lr();
        self.adam.step(self.model.params_mut(), &grads, lr)?;
        self.model.apply_bn_updates(&bn_updates);
        self.step += 1;
        Ok(loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint of the epoch with the highest dev macro-F1 (earliest on ties).
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochLog>,
}

fn snapshot(model: &Model<f32>, train: &LabeledSet, cfg: &TrainConfig, step: u64, epoch: usize, f1: f64) -> Checkpoint {
    let mut ck = Checkpoint::from_model(model, &train.class_names, Some(&train.feature_config));
    ck.trainer = Some(TrainerState {
        step,
        epoch,
        seed: cfg.seed,
        dev_macro_f1: Some(f1),
    });
    ck
}

/// Trains on `train`, scoring `dev` after every epoch. `on_epoch` sees each
/// log record as soon as the epoch finishes.
pub fn train(
    train: &LabeledSet,
    dev: &LabeledSet,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Data("training needs non-empty train and dev splits".into()));
    }
    if train.class_names != dev.class_names || train.class_names.len() != model_config.n_classes {
        return Err(Error::Config(format!(
            "class list mismatch: train [{}], dev [{}], model has {} classes",
            train.class_names.join(","),
            dev.class_names.join(","),
            model_config.n_classes
        )));
    }
    if train.feature_config != dev.feature_config {
        return Err(Error::Config("train and dev features use different configurations".into()));
    }
    let per_epoch = train.len().div_ceil(cfg.batch_size) as u64;
    let mut trainer = Trainer::new(model_config, cfg, per_epoch * cfg.epochs as u64)?;
    let (mean, std) = coefficient_stats(&train.features);
    trainer.model_mut().set_input_norm(&mean, &std)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    for epoch in 1..=cfg.epochs {
        let batches = make_batches(&train.features, &train.labels, cfg.crop_frames, cfg.batch_size, cfg.seed, epoch)?;
        let mut total = 0.0;
        for batch in &batches {
            let step = trainer.step();
            let loss = trainer.train_step(batch).map_err(|e| Error::TrainingAborted {
                epoch,
                step: step as usize,
                reason: e.to_string(),
                last_good: best.as_ref().map(|(_, ck)| Box::new(ck.clone())),
            })?;
            total += loss * batch.labels.len() as f64;
        }
        let f1 = eval::evaluate(trainer.model(), &train.class_names, dev)?.macro_f1;
        let record = EpochLog {
            epoch,
            loss: total / train.len() as f64,
            dev_macro_f1: f1,
            lr: trainer.current_lr(),
        };
        on_epoch(&record);
        log.push(record);
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, snapshot(trainer.model(), train, cfg, trainer.step(), epoch, f1)));
        }
    }
    let last = snapshot(
        trainer.model(),
        train,
        cfg,
        trainer.step(),
        cfg.epochs,
        log.last().map_or(0.0, |l| l.dev_macro_f1),
    );
    Ok(TrainOutcome {
        best: best.map(|(_, ck)| ck).expect("at least one epoch"),
        last,
        log,
    })
}

/// Per-coefficient mean and standard deviation over all frames.
pub fn coefficient_stats(features: &[FeatureMatrix]) -> (Vec<f64>, Vec<f64>) {
    let d = features.first().map_or(0, |f| f.dims);
    let mut sum = vec![0.0f64; d];
    let mut sq = vec![0.0f64; d];
    let mut n = 0usize;
    for f in features {
        for row in f.values.chunks(d) {
            for ((s, q), &v) in sum.iter_mut().zip(&mut sq).zip(row) {
                *s += v as f64;
                *q += (v as f64) * (v as f64);
            }
        }
        n += f.frames;
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
        .collect();
    (mean, std)
}

pub fn format_log(log: &[EpochLog]) -> String {
    log.iter().map(|l| format!("{l}\n")).collect()
}
