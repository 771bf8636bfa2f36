use serde::{Deserialize, Serialize};

use super::{GradBuffer, MatrixFactorization, NeuralPreferenceModel, ScoreModel};
use crate::prefcore::{ItemId, UserId};

/// Either supported model, for callers that pick the architecture at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Mf(MatrixFactorization),
    Neural(NeuralPreferenceModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mf,
    Neural,
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Mf(_) => ModelKind::Mf,
            AnyModel::Neural(_) => ModelKind::Neural,
        }
    }
}

impl From<MatrixFactorization> for AnyModel {
    fn from(m: MatrixFactorization) -> Self {
        AnyModel::Mf(m)
    }
}

impl From<NeuralPreferenceModel> for AnyModel {
    fn from(m: NeuralPreferenceModel) -> Self {
        AnyModel::Neural(m)
    }
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::Mf($m) => $body,
            AnyModel::Neural($m) => $body,
        }
    };
}

impl ScoreModel for AnyModel {
    fn n_users(&self) -> usize {
        dispatch!(self, m => m.n_users())
    }

    fn n_items(&self) -> usize {
        dispatch!(self, m => m.n_items())
    }

    fn score(&self, user: UserId, item: ItemId) -> f64 {
        dispatch!(self, m => m.score(user, item))
    }

    fn params(&self) -> &[f64] {
        dispatch!(self, m => m.params())
    }

    fn params_mut(&mut self) -> &mut [f64] {
        dispatch!(self, m => m.params_mut())
    }

    fn accumulate_score_gradient(&self, user: UserId, item: ItemId, noise: Option<&[f64]>, weight: f64, grad: &mut GradBuffer) {
        dispatch!(self, m => m.accumulate_score_gradient(user, item, noise, weight, grad))
    }

    fn noise_dim(&self) -> usize {
        dispatch!(self, m => m.noise_dim())
    }

    fn trains_with_noise(&self) -> bool {
        dispatch!(self, m => m.trains_with_noise())
    }

    fn score_with_noise(&self, user: UserId, item: ItemId, noise: Option<&[f64]>) -> f64 {
        dispatch!(self, m => m.score_with_noise(user, item, noise))
    }
}
