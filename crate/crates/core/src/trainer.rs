//! Mini-batch Adam training with early stopping on validation loss.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    batch_gradient, batch_objective, bce_from_logit, Example, FusionModelParams, ModelDims,
    ModelError, ModelVariant, ParamsFile,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("validation split is empty")]
    EmptyVal,
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coefficient of `||weights||^2`.
    pub l2: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub variant: ModelVariant,
    pub dims: ModelDims,
    /// Note decay rate per hour.
    pub lambda: f64,
    pub adam: AdamConfig,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Skip steps with non-finite gradients instead of failing.
    pub tolerant: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            l2: 1e-5,
            batch_size: 32,
            patience: 5,
            max_epochs: 100,
            seed: 0,
            variant: ModelVariant::TsNotesExpert,
            dims: ModelDims {
                d: 10,
                h: 256,
                b: 768,
                t: 48,
            },
            lambda: 0.05,
            adam: AdamConfig::default(),
            clip_norm: Some(5.0),
            tolerant: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return err(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return err("batch_size, patience and max_epochs must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps <= 0.0 {
            return err(format!("invalid Adam constants {a:?}"));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return err(format!("clip_norm must be positive, got {c}"));
            }
        }
        self.dims.validate(self.variant)?;
        Ok(())
    }
}

/// BCE of a probability. Evaluated through the logit so values near 0 or 1
/// keep precision.
pub fn bce_loss(y_hat: f64, y: u8) -> f64 {
    let z = y_hat.ln() - (-y_hat).ln_1p();
    bce_from_logit(z, f64::from(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Skipped,
}

/// One bias-corrected Adam update. Non-finite gradients fail, or skip the
/// step without touching the state when `tolerant`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    adam: &AdamConfig,
    tolerant: bool,
) -> Result<StepOutcome, TrainError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    if grads.iter().any(|g| !g.is_finite()) {
        return if tolerant {
            Ok(StepOutcome::Skipped)
        } else {
            Err(TrainError::NonFiniteGradient {
                step: state.step + 1,
            })
        };
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - adam.beta1.powi(t);
    let c2 = 1.0 - adam.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = adam.beta1 * *m + (1.0 - adam.beta1) * g;
        *v = adam.beta2 * *v + (1.0 - adam.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + adam.eps);
    }
    Ok(StepOutcome::Applied)
}

/// Scales `grads` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before scaling.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    pub train: f64,
    pub val: f64,
}

/// Something trained one epoch at a time, with restorable snapshots.
pub trait EpochModel {
    type Snapshot;
    /// `epoch` counts from 1.
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochLosses, TrainError>;
    fn snapshot(&self) -> Self::Snapshot;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopOutcome<S> {
    pub best: S,
    /// 1-based.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
}

/// Minimum decrease in validation loss that counts as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-6;

/// Runs epochs until validation loss has not improved for `patience`
/// consecutive epochs or `max_epochs` is reached, keeping the best snapshot.
pub fn run_early_stopping<M: EpochModel>(
    model: &mut M,
    patience: usize,
    max_epochs: usize,
) -> Result<EarlyStopOutcome<M::Snapshot>, TrainError> {
    let mut best: Option<(M::Snapshot, usize, f64)> = None;
    let mut train_losses = Vec::new();
    let mut val_losses = Vec::new();
    for epoch in 1..=max_epochs {
        let losses = model.run_epoch(epoch)?;
        if !losses.train.is_finite() || !losses.val.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        train_losses.push(losses.train);
        val_losses.push(losses.val);
        let improved = match &best {
            None => true,
            Some((_, _, b)) => losses.val < b - IMPROVEMENT_TOL,
        };
        if improved {
            best = Some((model.snapshot(), epoch, losses.val));
        } else if epoch - best.as_ref().map_or(0, |b| b.1) >= patience {
            break;
        }
    }
    let (best, best_epoch, best_val_loss) = best.expect("max_epochs >= 1");
    Ok(EarlyStopOutcome {
        best,
        best_epoch,
        best_val_loss,
        epochs_run: train_losses.len(),
        train_losses,
        val_losses,
    })
}

/// Record of one training run, written next to the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_val: usize,
    /// Full objective on the training split after each epoch.
    pub train_loss: Vec<f64>,
    /// Mean BCE on the validation split after each epoch.
    pub val_loss: Vec<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// SHA-256 of the best parameters serialized as a [`ParamsFile`].
    pub params_sha256: String,
    pub wall_time_secs: f64,
}

/// Hex SHA-256 of the canonical JSON of `params`.
pub fn params_hash(params: &FusionModelParams, init_seed: u64) -> String {
    let json = serde_json::to_vec(&ParamsFile::from_params(params, init_seed))
        .expect("parameters serialize");
    hex(&Sha256::digest(&json))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct FusionTrainer<'a> {
    params: FusionModelParams,
    adam: AdamState,
    train: &'a [Example],
    val: Vec<&'a Example>,
    config: &'a TrainConfig,
}

impl EpochModel for FusionTrainer<'_> {
    type Snapshot = FusionModelParams;

    fn run_epoch(&mut self, epoch: usize) -> Result<EpochLosses, TrainError> {
        let cfg = self.config;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(
            cfg.seed.wrapping_add(epoch as u64),
        ));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &self.train[i]).collect();
            let (_, mut grad) = batch_gradient(&self.params, &batch, cfg.l2)?;
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut grad, c);
            }
            adam_step(
                &mut self.params.theta,
                &grad,
                &mut self.adam,
                cfg.learning_rate,
                &cfg.adam,
                cfg.tolerant,
            )?;
        }
        let all: Vec<&Example> = self.train.iter().collect();
        Ok(EpochLosses {
            train: batch_objective(&self.params, &all, cfg.l2)?,
            val: batch_objective(&self.params, &self.val, 0.0)?,
        })
    }

    fn snapshot(&self) -> FusionModelParams {
        self.params.clone()
    }
}

/// Trains `config.variant` from a seeded initialization and returns the
/// best-validation-loss parameters.
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<(FusionModelParams, TrainManifest), TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyVal);
    }
    let start = Instant::now();
    let params = FusionModelParams::init(config.variant, config.dims, config.seed)?;
    let mut trainer = FusionTrainer {
        adam: AdamState::new(params.theta.len()),
        params,
        train: train_set,
        val: val_set.iter().collect(),
        config,
    };
    let out = run_early_stopping(&mut trainer, config.patience, config.max_epochs)?;
    let manifest = TrainManifest {
        config: config.clone(),
        n_train: train_set.len(),
        n_val: val_set.len(),
        train_loss: out.train_losses,
        val_loss: out.val_losses,
        epochs_run: out.epochs_run,
        best_epoch: out.best_epoch,
        best_val_loss: out.best_val_loss,
        params_sha256: params_hash(&out.best, config.seed),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((out.best, manifest))
}
