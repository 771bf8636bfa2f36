//! Two-path neural preference scorer.
//!
//! ```text
//! p  = P[u] + Wz z                (user embedding, optionally perturbed)
//! q  = Q[i] + Wf x_i              (item embedding plus feature projection)
//! g  = p * q                      (element-wise, GMF path)
//! h2 = relu(W2 relu(W1 [p; q] + b1) + b2)   (MLP path)
//! s  = w_g . g + w_h . h2 + b
//! ```
//!
//! `z` is an epistemic noise vector; `z = 0` gives the mean prediction.
//! Backpropagation is written out by hand for this fixed architecture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GradBuffer, ModelError, ScoreModel, TrainConfig};
use crate::prefcore::{ItemId, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub embed_dim: usize,
    pub hidden: [usize; 2],
    pub noise_dim: usize,
    /// Draw `z ~ N(0, I)` for every comparison during training.
    pub train_with_noise: bool,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self { embed_dim: 16, hidden: [32, 16], noise_dim: 8, train_with_noise: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    d: usize,
    h1: usize,
    h2: usize,
    dz: usize,
    nf: usize,
    user_emb: usize,
    item_emb: usize,
    feat_proj: usize,
    noise_proj: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    out_g: usize,
    out_h: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(n_users: usize, n_items: usize, n_features: usize, cfg: &NeuralConfig) -> Self {
        let d = cfg.embed_dim;
        let [h1, h2] = cfg.hidden;
        let dz = cfg.noise_dim;
        let user_emb = 0;
        let item_emb = user_emb + n_users * d;
        let feat_proj = item_emb + n_items * d;
        let noise_proj = feat_proj + d * n_features;
        let w1 = noise_proj + d * dz;
        let b1 = w1 + h1 * 2 * d;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let out_g = b2 + h2;
        let out_h = out_g + d;
        let out_b = out_h + h2;
        Self { d, h1, h2, dz, nf: n_features, user_emb, item_emb, feat_proj, noise_proj, w1, b1, w2, b2, out_g, out_h, out_b, total: out_b + 1 }
    }
}

/// Intermediate activations of one forward pass.
struct Forward {
    p: Vec<f64>,
    q: Vec<f64>,
    a1: Vec<f64>,
    r1: Vec<f64>,
    a2: Vec<f64>,
    r2: Vec<f64>,
    score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralPreferenceModel {
    n_users: usize,
    n_items: usize,
    config: NeuralConfig,
    /// Row-major `n_items x n_features`; empty when the model has no features.
    features: Vec<f64>,
    layout: Layout,
    params: Vec<f64>,
}

impl NeuralPreferenceModel {
    /// All-zero parameters (every score is 0).
    pub fn zeros(n_users: usize, n_items: usize, features: Option<(usize, Vec<f64>)>, config: NeuralConfig) -> Result<Self, ModelError> {
        let (nf, features) = features.unwrap_or((0, Vec::new()));
        if features.len() != n_items * nf {
            return Err(ModelError::InvalidConfig(format!(
                "feature matrix has {} entries, expected {n_items} x {nf}",
                features.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidConfig("feature matrix contains non-finite values".into()));
        }
        if config.embed_dim == 0 || config.hidden.contains(&0) {
            return Err(ModelError::InvalidConfig("embedding and hidden widths must be positive".into()));
        }
        let layout = Layout::new(n_users, n_items, nf, &config);
        Ok(Self { n_users, n_items, config, features, layout, params: vec![0.0; layout.total] })
    }

    /// Random initialisation: embeddings `N(0, init_std)`, dense layers scaled
    /// by fan-in, the noise projection small so that `z` starts with little
    /// influence, biases zero.
    pub fn new<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        features: Option<(usize, Vec<f64>)>,
        config: NeuralConfig,
        init_std: f64,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeros(n_users, n_items, features, config)?;
        let l = model.layout;
        let mut fill = |params: &mut [f64], std: f64| {
            if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("finite std");
                params.iter_mut().for_each(|p| *p = normal.sample(rng));
            }
        };
        let p = &mut model.params;
        fill(&mut p[l.user_emb..l.feat_proj], init_std);
        if l.nf > 0 {
            fill(&mut p[l.feat_proj..l.noise_proj], 1.0 / (l.nf as f64).sqrt());
        }
        if l.dz > 0 {
            fill(&mut p[l.noise_proj..l.w1], 0.1 / (l.dz as f64).sqrt());
        }
        fill(&mut p[l.w1..l.b1], (2.0 / (2 * l.d) as f64).sqrt());
        fill(&mut p[l.w2..l.b2], (2.0 / l.h1 as f64).sqrt());
        fill(&mut p[l.out_g..l.out_b], 1.0 / ((l.d + l.h2) as f64).sqrt());
        Ok(model)
    }

    pub fn from_config(
        n_users: usize,
        n_items: usize,
        features: Option<(usize, Vec<f64>)>,
        config: NeuralConfig,
        train: &TrainConfig,
    ) -> Result<Self, ModelError> {
        let std = train.init_std_for(config.embed_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        Self::new(n_users, n_items, features, config, std, &mut rng)
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.layout.nf
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Score for `(u, i)` under noise `z` (`None` is the zero vector).
    pub fn forward(&self, user: UserId, item: ItemId, z: Option<&[f64]>) -> Result<f64, ModelError> {
        if user.0 >= self.n_users {
            return Err(ModelError::UnknownUser(user, self.n_users));
        }
        if item.0 >= self.n_items {
            return Err(ModelError::UnknownItem(item, self.n_items));
        }
        if let Some(z) = z {
            if z.len() != self.layout.dz {
                return Err(ModelError::NoiseDimension { expected: self.layout.dz, got: z.len() });
            }
        }
        Ok(self.run(user, item, z).score)
    }

    fn run(&self, user: UserId, item: ItemId, z: Option<&[f64]>) -> Forward {
        let l = &self.layout;
        let w = &self.params;
        let d = l.d;

        let mut p = w[l.user_emb + user.0 * d..l.user_emb + (user.0 + 1) * d].to_vec();
        if let Some(z) = z {
            for (r, pr) in p.iter_mut().enumerate() {
                let row = &w[l.noise_proj + r * l.dz..l.noise_proj + (r + 1) * l.dz];
                *pr += dot(row, z);
            }
        }
        let mut q = w[l.item_emb + item.0 * d..l.item_emb + (item.0 + 1) * d].to_vec();
        if l.nf > 0 {
            let x = &self.features[item.0 * l.nf..(item.0 + 1) * l.nf];
            for (r, qr) in q.iter_mut().enumerate() {
                *qr += dot(&w[l.feat_proj + r * l.nf..l.feat_proj + (r + 1) * l.nf], x);
            }
        }

        let mut a1 = vec![0.0; l.h1];
        for (r, a) in a1.iter_mut().enumerate() {
            let row = &w[l.w1 + r * 2 * d..l.w1 + (r + 1) * 2 * d];
            *a = dot(&row[..d], &p) + dot(&row[d..], &q) + w[l.b1 + r];
        }
        let r1: Vec<f64> = a1.iter().map(|&a| a.max(0.0)).collect();
        let mut a2 = vec![0.0; l.h2];
        for (r, a) in a2.iter_mut().enumerate() {
            *a = dot(&w[l.w2 + r * l.h1..l.w2 + (r + 1) * l.h1], &r1) + w[l.b2 + r];
        }
        let r2: Vec<f64> = a2.iter().map(|&a| a.max(0.0)).collect();

        let gmf: f64 = (0..d).map(|k| w[l.out_g + k] * p[k] * q[k]).sum();
        let score = gmf + dot(&w[l.out_h..l.out_h + l.h2], &r2) + w[l.out_b];
        Forward { p, q, a1, r1, a2, r2, score }
    }

    fn backward(&self, user: UserId, item: ItemId, z: Option<&[f64]>, fwd: &Forward, weight: f64, grad: &mut GradBuffer) {
        let l = &self.layout;
        let w = &self.params;
        let d = l.d;

        // output head
        for k in 0..d {
            grad.add(l.out_g + k, weight * fwd.p[k] * fwd.q[k]);
        }
        grad.add_scaled(l.out_h, &fwd.r2, weight);
        grad.add(l.out_b, weight);

        // MLP path
        let da2: Vec<f64> = (0..l.h2).map(|r| if fwd.a2[r] > 0.0 { weight * w[l.out_h + r] } else { 0.0 }).collect();
        let mut dr1 = vec![0.0; l.h1];
        for (r, &g) in da2.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let off = l.w2 + r * l.h1;
            grad.add_scaled(off, &fwd.r1, g);
            grad.add(l.b2 + r, g);
            for (c, dr) in dr1.iter_mut().enumerate() {
                *dr += w[off + c] * g;
            }
        }
        let mut dp = vec![0.0; d];
        let mut dq = vec![0.0; d];
        for r in 0..l.h1 {
            if fwd.a1[r] <= 0.0 || dr1[r] == 0.0 {
                continue;
            }
            let g = dr1[r];
            let off = l.w1 + r * 2 * d;
            grad.add_scaled(off, &fwd.p, g);
            grad.add_scaled(off + d, &fwd.q, g);
            grad.add(l.b1 + r, g);
            for k in 0..d {
                dp[k] += w[off + k] * g;
                dq[k] += w[off + d + k] * g;
            }
        }

        // GMF path
        for k in 0..d {
            dp[k] += weight * w[l.out_g + k] * fwd.q[k];
            dq[k] += weight * w[l.out_g + k] * fwd.p[k];
        }

        grad.add_scaled(l.user_emb + user.0 * d, &dp, 1.0);
        if let Some(z) = z {
            for (r, &g) in dp.iter().enumerate() {
                grad.add_scaled(l.noise_proj + r * l.dz, z, g);
            }
        }
        grad.add_scaled(l.item_emb + item.0 * d, &dq, 1.0);
        if l.nf > 0 {
            let x = &self.features[item.0 * l.nf..(item.0 + 1) * l.nf];
            for (r, &g) in dq.iter().enumerate() {
                grad.add_scaled(l.feat_proj + r * l.nf, x, g);
            }
        }
    }

    pub(crate) fn from_parts(
        n_users: usize,
        n_items: usize,
        n_features: usize,
        features: Vec<f64>,
        config: NeuralConfig,
        params: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeros(n_users, n_items, Some((n_features, features)), config)?;
        model.set_params(&params)?;
        Ok(model)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ScoreModel for NeuralPreferenceModel {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score(&self, user: UserId, item: ItemId) -> f64 {
        self.run(user, item, None).score
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_score_gradient(&self, user: UserId, item: ItemId, noise: Option<&[f64]>, weight: f64, grad: &mut GradBuffer) {
        let fwd = self.run(user, item, noise);
        self.backward(user, item, noise, &fwd, weight, grad);
    }

    fn noise_dim(&self) -> usize {
        self.layout.dz
    }

    fn trains_with_noise(&self) -> bool {
        self.config.train_with_noise && self.layout.dz > 0
    }

    fn score_with_noise(&self, user: UserId, item: ItemId, noise: Option<&[f64]>) -> f64 {
        self.run(user, item, noise).score
    }
}
