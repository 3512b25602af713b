//! Loss, gradients, Adam and the mini-batch training loop.
//!
//! Super-resolution (sharp LR input) and joint deblurring (blurred LR input)
//! share one loop; they differ only in the pairs fed to it.

mod adam;
mod backward;
mod gradcheck;
mod loss;

pub use adam::{adam_step, OptimizerState};
pub use backward::backward;
pub use gradcheck::{gradcheck, GradcheckReport, TensorCheck};
pub use loss::mse_loss;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::derive_seed;
use crate::imagecore::PatchPair;
use crate::model::{forward, init_model, predict, ModelConfig, ModelWeights, Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Sharp LR inputs: super-resolution only.
    St,
    /// Blurred LR inputs: joint super-resolution and deblurring.
    Sdt,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st" => Ok(TrainMode::St),
            "sdt" => Ok(TrainMode::Sdt),
            other => Err(Error::invalid(format!("unknown training mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub scale: usize,
    pub batch: usize,
    /// LR-domain patch edge in pixels.
    pub patch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub seed: u64,
    pub dropout_keep: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Sdt,
            scale: 2,
            batch: 20,
            patch: 32,
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 1000,
            seed: 0,
            dropout_keep: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.patch == 0 {
            return Err(Error::invalid("patch must be at least 1"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam constants out of range"));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::invalid(format!("dropout keep must be in (0, 1], got {}", self.dropout_keep)));
        }
        Ok(())
    }
}

/// A training sample converted to network tensors.
#[derive(Clone, Debug)]
pub struct Sample<T = f32> {
    pub lr: Tensor<T>,
    pub hr: Tensor<T>,
}

impl<T: Scalar> Sample<T> {
    pub fn from_pair(pair: &PatchPair) -> Result<Self> {
        Ok(Self {
            lr: Tensor::from_luma(&pair.lr)?,
            hr: Tensor::from_luma(&pair.hr)?,
        })
    }
}

/// Mean loss and mean parameter gradient over `samples`, with per-sample
/// dropout seeds. Per-sample passes run in parallel; the reduction is serial
/// and in order, so results do not depend on the thread count.
pub fn batch_gradient<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    samples: &[&Sample<T>],
    seeds: &[u64],
    training: bool,
) -> Result<(f64, ModelWeights<T>)> {
    if samples.is_empty() || samples.len() != seeds.len() {
        return Err(Error::invalid("batch is empty or seeds do not match samples"));
    }
    let per_sample: Vec<(f64, ModelWeights<T>)> = samples
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(s, &seed)| {
            let (out, cache) = forward(w, cfg, &s.lr, training, seed)?;
            let (loss, grad) = mse_loss(&out, &s.hr)?;
            let cache = if training {
                cache
            } else {
                // Inference caches are rejected by `backward`; replay with
                // dropout disabled instead.
                crate::model::forward_with_masks(w, cfg, &s.lr, cache.masks())?.1
            };
            Ok((loss, backward(w, cfg, &cache, &grad)?))
        })
        .collect::<Result<_>>()?;
    let inv = 1.0 / samples.len() as f64;
    let mut iter = per_sample.into_iter();
    let (mut loss, mut total) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (acc, t) in total.tensors_mut().into_iter().zip(g.tensors()) {
            for (a, &b) in acc.iter_mut().zip(t) {
                *a += b;
            }
        }
    }
    let scale = T::lit(inv);
    for t in total.tensors_mut() {
        for v in t.iter_mut() {
            *v = *v * scale;
        }
    }
    Ok((loss * inv, total))
}

fn check_pairs(pairs: &[PatchPair], scale: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for p in pairs {
        if !p.lr.is_luma() || !p.hr.is_luma() {
            return Err(Error::invalid("training pairs must be luma"));
        }
        if p.hr.width() != scale * p.lr.width() || p.hr.height() != scale * p.lr.height() {
            return Err(Error::invalid(format!(
                "pair {}x{} -> {}x{} does not match scale {scale}",
                p.lr.width(),
                p.lr.height(),
                p.hr.width(),
                p.hr.height()
            )));
        }
    }
    Ok(())
}

/// Stateful mini-batch trainer: owns weights, optimiser state and the
/// seeded batch order.
pub struct Trainer {
    samples: Vec<Sample<f32>>,
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    weights: ModelWeights<f32>,
    state: OptimizerState<f32>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    losses: Vec<f64>,
}

impl Trainer {
    /// He-initialised trainer. The training config's dropout keep probability
    /// overrides the model config's.
    pub fn new(pairs: &[PatchPair], cfg: &TrainConfig, model_cfg: &ModelConfig) -> Result<Self> {
        let mut model_cfg = model_cfg.clone();
        model_cfg.dropout_keep = cfg.dropout_keep;
        let weights = init_model(&model_cfg, cfg.seed)?;
        Self::with_weights(pairs, cfg, &model_cfg, weights)
    }

    pub fn with_weights(
        pairs: &[PatchPair],
        cfg: &TrainConfig,
        model_cfg: &ModelConfig,
        weights: ModelWeights<f32>,
    ) -> Result<Self> {
        cfg.validate()?;
        model_cfg.validate()?;
        if cfg.scale != model_cfg.scale {
            return Err(Error::invalid("training and model scales differ"));
        }
        check_pairs(pairs, cfg.scale)?;
        weights.check_shapes(model_cfg)?;
        let samples = pairs.iter().map(Sample::from_pair).collect::<Result<Vec<_>>>()?;
        let state = OptimizerState::new(model_cfg)?;
        Ok(Self {
            order: (0..samples.len()).collect(),
            cursor: usize::MAX,
            samples,
            cfg: cfg.clone(),
            model_cfg: model_cfg.clone(),
            weights,
            state,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX)),
            losses: Vec::new(),
        })
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.cfg.batch);
        while batch.len() < self.cfg.batch {
            if self.cursor >= self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    /// One optimiser step on the next mini-batch; returns its mean loss.
    pub fn step(&mut self) -> Result<f64> {
        let step = self.state.step;
        let idx = self.next_batch();
        let samples: Vec<&Sample<f32>> = idx.iter().map(|&i| &self.samples[i]).collect();
        let step_seed = derive_seed(self.cfg.seed, step);
        let seeds: Vec<u64> = (0..samples.len() as u64).map(|i| derive_seed(step_seed, i)).collect();
        let (loss, grad) = batch_gradient(&self.weights, &self.model_cfg, &samples, &seeds, true)?;
        adam_step(&mut self.weights, &grad, &mut self.state, &self.cfg)?;
        self.losses.push(loss);
        Ok(loss)
    }

    pub fn steps_done(&self) -> u64 {
        self.state.step
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn weights(&self) -> &ModelWeights<f32> {
        &self.weights
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model_cfg
    }

    /// Mean inference-mode MSE over the training samples.
    pub fn evaluate_mse(&self) -> Result<f64> {
        let total: f64 = self
            .samples
            .par_iter()
            .map(|s| Ok(mse_loss(&predict(&self.weights, &self.model_cfg, &s.lr)?, &s.hr)?.0))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum();
        Ok(total / self.samples.len() as f64)
    }

    pub fn into_parts(self) -> (ModelWeights<f32>, Vec<f64>) {
        (self.weights, self.losses)
    }
}

/// Trains for `cfg.steps` mini-batches and returns the weights with the
/// per-step loss log.
pub fn train(pairs: &[PatchPair], cfg: &TrainConfig, model_cfg: &ModelConfig) -> Result<(ModelWeights<f32>, Vec<f64>)> {
    let mut trainer = Trainer::new(pairs, cfg, model_cfg)?;
    for _ in 0..cfg.steps {
        trainer.step()?;
    }
    Ok(trainer.into_parts())
}
