use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GradBuffer, ModelError, ScoreModel, TrainConfig, TrainReport};
use crate::datasets::RatingRecord;
use crate::prefcore::{ItemId, UserId};

/// `s_ui = dot(U_u, V_i)` with `K`-dimensional user and item factors.
///
/// Parameter layout: all user rows, then all item rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFactorization {
    n_users: usize,
    n_items: usize,
    k: usize,
    params: Vec<f64>,
}

impl MatrixFactorization {
    /// Factors drawn i.i.d. from `Normal(0, init_std)`.
    pub fn new<R: Rng + ?Sized>(n_users: usize, n_items: usize, k: usize, init_std: f64, rng: &mut R) -> Self {
        let n = (n_users + n_items) * k;
        let params = if init_std > 0.0 {
            let normal = Normal::new(0.0, init_std).expect("finite std");
            (0..n).map(|_| normal.sample(rng)).collect()
        } else {
            vec![0.0; n]
        };
        Self { n_users, n_items, k, params }
    }

    /// Initialises with the config's `init_std` (default `1/sqrt(K)`) and seed.
    pub fn from_config(n_users: usize, n_items: usize, k: usize, cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::new(n_users, n_items, k, cfg.init_std_for(k), &mut rng)
    }

    pub fn zeros(n_users: usize, n_items: usize, k: usize) -> Self {
        Self { n_users, n_items, k, params: vec![0.0; (n_users + n_items) * k] }
    }

    pub fn from_params(n_users: usize, n_items: usize, k: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        let expected = (n_users + n_items) * k;
        if params.len() != expected {
            return Err(ModelError::ParamLength { expected, got: params.len() });
        }
        Ok(Self { n_users, n_items, k, params })
    }

    pub fn latent_dim(&self) -> usize {
        self.k
    }

    #[inline]
    fn user_offset(&self, u: UserId) -> usize {
        u.0 * self.k
    }

    #[inline]
    fn item_offset(&self, i: ItemId) -> usize {
        (self.n_users + i.0) * self.k
    }

    pub fn user_factors(&self, u: UserId) -> &[f64] {
        let o = self.user_offset(u);
        &self.params[o..o + self.k]
    }

    pub fn item_factors(&self, i: ItemId) -> &[f64] {
        let o = self.item_offset(i);
        &self.params[o..o + self.k]
    }

    pub fn user_factors_mut(&mut self, u: UserId) -> &mut [f64] {
        let o = self.user_offset(u);
        &mut self.params[o..o + self.k]
    }

    /// Squared Frobenius norm of all factors.
    pub fn squared_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }
}

impl ScoreModel for MatrixFactorization {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    #[inline]
    fn score(&self, user: UserId, item: ItemId) -> f64 {
        self.user_factors(user).iter().zip(self.item_factors(item)).map(|(a, b)| a * b).sum()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_score_gradient(&self, user: UserId, item: ItemId, _noise: Option<&[f64]>, weight: f64, grad: &mut GradBuffer) {
        let uo = self.user_offset(user);
        let io = self.item_offset(item);
        grad.add_scaled(uo, self.item_factors(item), weight);
        grad.add_scaled(io, self.user_factors(user), weight);
    }
}

/// Mean squared error of `dot(U_u, V_i)` against the ratings.
pub fn rating_mse(model: &MatrixFactorization, ratings: &[RatingRecord]) -> f64 {
    if ratings.is_empty() {
        return 0.0;
    }
    let sse: f64 = ratings
        .iter()
        .map(|r| {
            let e = r.rating - model.score(r.user, r.item);
            e * e
        })
        .sum();
    sse / ratings.len() as f64
}

/// SGD on `sum (r_ui - U_u.V_i)^2 + lambda (|U|^2 + |V|^2)`.
///
/// Each rating updates `U_u` and `V_i` with the (halved) gradient of its own
/// term, `U_u += lr (e V_i - lambda U_u)`. The report holds the training MSE
/// after each epoch.
pub fn train_rating_mse(model: &mut MatrixFactorization, ratings: &[RatingRecord], cfg: &TrainConfig) -> Result<TrainReport, ModelError> {
    cfg.validate()?;
    for r in ratings {
        if r.user.0 >= model.n_users {
            return Err(ModelError::UnknownUser(r.user, model.n_users));
        }
        if r.item.0 >= model.n_items {
            return Err(ModelError::UnknownItem(r.item, model.n_items));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    let k = model.k;
    let lr = cfg.learning_rate;
    let lambda = cfg.l2_lambda;
    let mut grad = GradBuffer::new(model.params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for &idx in batch {
                let r = &ratings[idx];
                let e = r.rating - model.score(r.user, r.item);
                let uo = model.user_offset(r.user);
                let io = model.item_offset(r.item);
                for f in 0..k {
                    grad.add(uo + f, e * model.params[io + f]);
                    grad.add(io + f, e * model.params[uo + f]);
                }
            }
            grad.apply_ascent(&mut model.params, lr, lambda);
        }
        let mse = rating_mse(model, ratings);
        if !mse.is_finite() {
            return Err(ModelError::Diverged { epoch, objective: mse });
        }
        history.push(mse);
    }
    Ok(TrainReport { epoch_objective: history })
}
