//! Scoring models and their training.
//!
//! A [`ScoreModel`] maps `(user, item)` to a log-score `s_ui`. Models are
//! trained by stochastic gradient ascent on the pairwise log-likelihood
//!
//! ```text
//! L = sum_(u,i,j) ln sigmoid(s_ui - s_uj)
//! ```
//!
//! whose derivatives with respect to the two scores are `1 - sigmoid(d)` and
//! `sigmoid(d) - 1`. Each model only has to provide the gradient of a single
//! score with respect to its parameters; the chain rule is applied here.

mod any;
mod checkpoint;
mod mf;
mod neural;

pub use any::{AnyModel, ModelKind};
pub use checkpoint::{ModelCheckpoint, ModelShape, CHECKPOINT_FORMAT_VERSION};
pub use mf::{rating_mse, train_rating_mse, MatrixFactorization};
pub use neural::{NeuralConfig, NeuralPreferenceModel};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plackett::{log_sigmoid, sigmoid};
use crate::prefcore::{ComparisonTriplet, ItemId, UserId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} out of range (model has {1} users)")]
    UnknownUser(UserId, usize),
    #[error("{0} out of range (model has {1} items)")]
    UnknownItem(ItemId, usize),
    #[error("non-finite input score {0}")]
    NonFinite(f64),
    #[error("training diverged at epoch {epoch}: objective {objective}")]
    Diverged { epoch: usize, objective: f64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("noise vector has dimension {got}, model expects {expected}")]
    NoiseDimension { expected: usize, got: usize },
    #[error("parameter vector has length {got}, model expects {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// A parametric scoring function `s_ui = f(u, i; params)`.
///
/// Parameters live in one flat vector so that snapshots, checkpoints and
/// generic SGD updates need no model-specific code.
pub trait ScoreModel: Clone + Send + Sync {
    fn n_users(&self) -> usize;

    fn n_items(&self) -> usize;

    /// Mean log-score (no epistemic noise).
    fn score(&self, user: UserId, item: ItemId) -> f64;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Adds `weight * d s_ui / d params` into `grad`. `noise` is the epistemic
    /// vector for models that have one and is ignored otherwise.
    fn accumulate_score_gradient(&self, user: UserId, item: ItemId, noise: Option<&[f64]>, weight: f64, grad: &mut GradBuffer);

    /// Dimension of the epistemic noise vector; 0 if the model has none.
    fn noise_dim(&self) -> usize {
        0
    }

    /// Whether training should draw a fresh noise vector per comparison.
    fn trains_with_noise(&self) -> bool {
        false
    }

    fn score_with_noise(&self, user: UserId, item: ItemId, noise: Option<&[f64]>) -> f64 {
        let _ = noise;
        self.score(user, item)
    }

    fn scores_for(&self, user: UserId, items: &[ItemId]) -> Vec<f64> {
        items.iter().map(|&i| self.score(user, i)).collect()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), ModelError> {
        let dst = self.params_mut();
        if dst.len() != params.len() {
            return Err(ModelError::ParamLength { expected: dst.len(), got: params.len() });
        }
        dst.copy_from_slice(params);
        Ok(())
    }

    fn check_triplet(&self, t: &ComparisonTriplet) -> Result<(), ModelError> {
        if t.user.0 >= self.n_users() {
            return Err(ModelError::UnknownUser(t.user, self.n_users()));
        }
        for item in [t.winner, t.loser] {
            if item.0 >= self.n_items() {
                return Err(ModelError::UnknownItem(item, self.n_items()));
            }
        }
        Ok(())
    }
}

/// Sparse gradient accumulator over a model's flat parameter vector.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    values: Vec<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl GradBuffer {
    pub fn new(n_params: usize) -> Self {
        Self { values: vec![0.0; n_params], touched: Vec::new(), marked: vec![false; n_params] }
    }

    #[inline]
    pub fn add(&mut self, idx: usize, value: f64) {
        if !self.marked[idx] {
            self.marked[idx] = true;
            self.touched.push(idx);
        }
        self.values[idx] += value;
    }

    /// Adds `scale * values` to the block starting at `offset`.
    #[inline]
    pub fn add_scaled(&mut self, offset: usize, values: &[f64], scale: f64) {
        for (k, v) in values.iter().enumerate() {
            self.add(offset + k, scale * v);
        }
    }

    /// Dense copy of the accumulated gradient.
    pub fn to_dense(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn touched(&self) -> &[usize] {
        &self.touched
    }

    /// Ascent step `p += lr * (g - l2 * p)` on every touched parameter, then resets.
    pub fn apply_ascent(&mut self, params: &mut [f64], lr: f64, l2: f64) {
        for &idx in &self.touched {
            params[idx] += lr * (self.values[idx] - l2 * params[idx]);
            self.values[idx] = 0.0;
            self.marked[idx] = false;
        }
        self.touched.clear();
    }

    pub fn clear(&mut self) {
        for &idx in &self.touched {
            self.values[idx] = 0.0;
            self.marked[idx] = false;
        }
        self.touched.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Standard deviation of the initial embeddings; `None` means `1/sqrt(K)`.
    pub init_std: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 50, l2_lambda: 0.01, batch_size: 1, seed: 0, init_std: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("l2_lambda must be >= 0, got {}", self.l2_lambda)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if let Some(std) = self.init_std {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(ModelError::InvalidConfig(format!("init_std must be >= 0, got {std}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_epochs(&self, epochs: usize) -> Self {
        Self { epochs, ..self.clone() }
    }

    pub(crate) fn init_std_for(&self, dim: usize) -> f64 {
        self.init_std.unwrap_or(1.0 / (dim.max(1) as f64).sqrt())
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean objective after each epoch: log-likelihood per comparison for
    /// pairwise training, squared error per rating for rating training.
    pub epoch_objective: Vec<f64>,
}

/// Sum of `ln P(winner > loser)` over `data`.
pub fn pairwise_loss<M: ScoreModel>(model: &M, data: &[ComparisonTriplet]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for t in data {
        model.check_triplet(t)?;
        total += log_sigmoid(model.score(t.user, t.winner) - model.score(t.user, t.loser));
    }
    Ok(total)
}

/// Derivatives of `ln sigmoid(s_ui - s_uj)` with respect to `s_ui` and `s_uj`.
pub fn loss_gradients(s_ui: f64, s_uj: f64) -> Result<(f64, f64), ModelError> {
    for s in [s_ui, s_uj] {
        if !s.is_finite() {
            return Err(ModelError::NonFinite(s));
        }
    }
    let g = sigmoid(s_uj - s_ui);
    Ok((g, -g))
}

/// Gradient of `ln P(winner > loser)` with respect to every parameter.
pub fn triplet_gradient<M: ScoreModel>(model: &M, t: &ComparisonTriplet, noise: Option<&[f64]>) -> Result<Vec<f64>, ModelError> {
    model.check_triplet(t)?;
    let mut grad = GradBuffer::new(model.params().len());
    accumulate_triplet(model, t, noise, &mut grad);
    Ok(grad.to_dense())
}

fn accumulate_triplet<M: ScoreModel>(model: &M, t: &ComparisonTriplet, noise: Option<&[f64]>, grad: &mut GradBuffer) -> f64 {
    let s_i = model.score_with_noise(t.user, t.winner, noise);
    let s_j = model.score_with_noise(t.user, t.loser, noise);
    let g = sigmoid(s_j - s_i);
    model.accumulate_score_gradient(t.user, t.winner, noise, g, grad);
    model.accumulate_score_gradient(t.user, t.loser, noise, -g, grad);
    log_sigmoid(s_i - s_j)
}

/// Runs `epochs` passes of shuffled mini-batch SGD ascent. Returns the mean
/// log-likelihood observed during each epoch when `monitor` is set.
fn sgd_epochs<M: ScoreModel>(
    model: &mut M,
    data: &[ComparisonTriplet],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    monitor: bool,
) -> Result<Vec<f64>, ModelError> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = GradBuffer::new(model.params().len());
    let noise_dim = if model.trains_with_noise() { model.noise_dim() } else { 0 };
    let mut noise = vec![0.0; noise_dim];
    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_ll = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for &idx in batch {
                let z = if noise_dim > 0 {
                    noise.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
                    Some(noise.as_slice())
                } else {
                    None
                };
                epoch_ll += accumulate_triplet(model, &data[idx], z, &mut grad);
            }
            grad.apply_ascent(model.params_mut(), cfg.learning_rate, cfg.l2_lambda);
        }
        if monitor {
            let mean = if data.is_empty() { 0.0 } else { epoch_ll / data.len() as f64 };
            if !mean.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
                return Err(ModelError::Diverged { epoch, objective: mean });
            }
            history.push(mean);
        }
    }
    Ok(history)
}

/// Trains `model` in place on `data`. The report holds the mean
/// log-likelihood per comparison accumulated during each epoch.
pub fn train_pairwise<M: ScoreModel>(model: &mut M, data: &[ComparisonTriplet], cfg: &TrainConfig) -> Result<TrainReport, ModelError> {
    cfg.validate()?;
    for t in data {
        model.check_triplet(t)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let epoch_objective = sgd_epochs(model, data, cfg, &mut rng, true)?;
    Ok(TrainReport { epoch_objective })
}

/// Returns a copy of `model` fine-tuned on `new_triplet` plus `replay`; the
/// input model is not touched.
pub fn clone_and_finetune<M: ScoreModel>(model: &M, new_triplet: &ComparisonTriplet, replay: &[ComparisonTriplet], cfg: &TrainConfig) -> M {
    let mut hypothetical = model.clone();
    if cfg.epochs == 0 {
        return hypothetical;
    }
    let mut data = Vec::with_capacity(replay.len() + 1);
    data.push(*new_triplet);
    data.extend_from_slice(replay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // monitoring off: no errors can arise
    let _ = sgd_epochs(&mut hypothetical, &data, cfg, &mut rng, false);
    hypothetical
}
