//! JSON checkpoints.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "seed": 7,
//!   "model": { "kind": "mf", "n_users": 2, "n_items": 3, "latent_dim": 4 },
//!   "params": [0.1, ...]
//! }
//! ```
//!
//! Neural checkpoints carry `"kind": "neural"` with `n_features`, the feature
//! matrix (row-major) and the architecture config. `params` is always the
//! model's flat parameter vector in its native layout.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnyModel, MatrixFactorization, ModelError, NeuralConfig, NeuralPreferenceModel, ScoreModel};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelShape {
    Mf { n_users: usize, n_items: usize, latent_dim: usize },
    Neural { n_users: usize, n_items: usize, n_features: usize, features: Vec<f64>, config: NeuralConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub seed: u64,
    pub model: ModelShape,
    pub params: Vec<f64>,
}

impl ModelCheckpoint {
    pub fn capture(model: &AnyModel, seed: u64) -> Self {
        let shape = match model {
            AnyModel::Mf(m) => ModelShape::Mf { n_users: m.n_users(), n_items: m.n_items(), latent_dim: m.latent_dim() },
            AnyModel::Neural(m) => ModelShape::Neural {
                n_users: m.n_users(),
                n_items: m.n_items(),
                n_features: m.n_features(),
                features: m.features().to_vec(),
                config: m.config().clone(),
            },
        };
        Self { format_version: CHECKPOINT_FORMAT_VERSION, seed, model: shape, params: model.params().to_vec() }
    }

    pub fn restore(&self) -> Result<AnyModel, ModelError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported format version {}", self.format_version)));
        }
        Ok(match &self.model {
            ModelShape::Mf { n_users, n_items, latent_dim } => {
                MatrixFactorization::from_params(*n_users, *n_items, *latent_dim, self.params.clone())?.into()
            }
            ModelShape::Neural { n_users, n_items, n_features, features, config } => {
                NeuralPreferenceModel::from_parts(*n_users, *n_items, *n_features, features.clone(), config.clone(), self.params.clone())?.into()
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
