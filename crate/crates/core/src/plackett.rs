//! Plackett-Luce ranking model.
//!
//! Items carry positive weights `theta_i = exp(s_i)`. A ranking is generated by
//! repeatedly picking one of the remaining items with probability proportional
//! to its weight, so
//!
//! ```text
//! P(pi | theta) = prod_k theta[pi_k] / sum_{j >= k} theta[pi_j]
//! ```
//!
//! and the pairwise marginal is `P(i > j) = sigmoid(s_i - s_j)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prefcore::{ItemId, PartialRanking};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlackettError {
    #[error("score vector is empty")]
    Empty,
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error("weight {0} is not strictly positive")]
    NonPositiveWeight(f64),
    #[error("input is not a permutation of {0} items")]
    NotAPermutation(usize),
    #[error("cannot sample depth {k} from {n} items")]
    DepthOutOfRange { k: usize, n: usize },
    #[error("smoothing constant must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("weights sum to zero and no smoothing was requested")]
    ZeroMass,
}

/// Positive Plackett-Luce weights over items `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    theta: Vec<f64>,
}

impl ScoreVector {
    /// Exponentiates log-scores. The maximum is subtracted first, which leaves
    /// every ranking probability unchanged and keeps the weights in `(0, 1]`.
    pub fn from_log_scores(log_scores: &[f64]) -> Result<Self, PlackettError> {
        if log_scores.is_empty() {
            return Err(PlackettError::Empty);
        }
        if let Some(&bad) = log_scores.iter().find(|s| !s.is_finite()) {
            return Err(PlackettError::NonFinite(bad));
        }
        let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let theta = log_scores.iter().map(|s| (s - max).exp()).collect::<Vec<_>>();
        // exp underflows for gaps beyond ~745 nats
        if let Some(&w) = theta.iter().find(|&&w| w <= 0.0) {
            return Err(PlackettError::NonPositiveWeight(w));
        }
        Ok(Self { theta })
    }

    pub fn from_weights(theta: Vec<f64>) -> Result<Self, PlackettError> {
        if theta.is_empty() {
            return Err(PlackettError::Empty);
        }
        for &w in &theta {
            if !w.is_finite() {
                return Err(PlackettError::NonFinite(w));
            }
            if w <= 0.0 {
                return Err(PlackettError::NonPositiveWeight(w));
            }
        }
        Ok(Self { theta })
    }

    pub fn uniform(n: usize) -> Result<Self, PlackettError> {
        Self::from_weights(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.theta
    }

    /// Probability that `item` is ranked first.
    pub fn first_place_probability(&self, item: ItemId) -> f64 {
        self.theta[item.0] / self.theta.iter().sum::<f64>()
    }
}

/// Smoothed selection probabilities `(theta_i + alpha) / sum_j (theta_j + alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedScoreVector {
    probs: Vec<f64>,
    alpha: f64,
}

impl SmoothedScoreVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The smoothed probabilities used as Plackett-Luce weights.
    pub fn to_scores(&self) -> Result<ScoreVector, PlackettError> {
        ScoreVector::from_weights(self.probs.clone())
    }
}

/// Default smoothing constant.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Probability of a complete ranking under the model.
pub fn ranking_probability(scores: &ScoreVector, ranking: &[ItemId]) -> Result<f64, PlackettError> {
    let n = scores.len();
    if ranking.len() != n {
        return Err(PlackettError::NotAPermutation(n));
    }
    let mut seen = vec![false; n];
    for item in ranking {
        match seen.get_mut(item.0) {
            Some(slot) if !*slot => *slot = true,
            _ => return Err(PlackettError::NotAPermutation(n)),
        }
    }
    Ok(ranking_probability_unchecked(scores.weights(), ranking))
}

/// Same as [`ranking_probability`] for callers that already hold a valid
/// permutation (e.g. exhaustive enumeration).
pub(crate) fn ranking_probability_unchecked(theta: &[f64], ranking: &[ItemId]) -> f64 {
    // suffix sums from the back; subtracting from a running total loses the
    // small weights to cancellation
    let mut tail = 0.0;
    let mut prob = 1.0;
    for item in ranking.iter().rev() {
        let w = theta[item.0];
        tail += w;
        prob *= w / tail;
    }
    prob
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)`, stable for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `P(i > j)` for log-scores `s_i`, `s_j`.
pub fn pairwise_probability(s_i: f64, s_j: f64) -> Result<f64, PlackettError> {
    if !s_i.is_finite() {
        return Err(PlackettError::NonFinite(s_i));
    }
    if !s_j.is_finite() {
        return Err(PlackettError::NonFinite(s_j));
    }
    Ok(sigmoid(s_i - s_j))
}

/// Draws the first `k` positions of a ranking.
///
/// Each step scans the remaining items in index order and picks the one whose
/// cumulative weight interval contains a uniform draw. Feeding the same RNG
/// stream to slightly different weight vectors therefore yields mostly
/// identical rankings, which the query selector relies on.
pub fn sample_topk<R: Rng + ?Sized>(scores: &ScoreVector, k: usize, rng: &mut R) -> Result<PartialRanking, PlackettError> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(PlackettError::DepthOutOfRange { k, n });
    }
    let mut sampler = TopKSampler::new(n);
    let mut out = Vec::with_capacity(k);
    sampler.sample_into(scores.weights(), k, rng, &mut out);
    Ok(PartialRanking::from_parts_unchecked(out, n))
}

/// Reusable scratch space for repeated top-k draws over one universe.
pub(crate) struct TopKSampler {
    taken: Vec<bool>,
}

impl TopKSampler {
    pub(crate) fn new(n: usize) -> Self {
        Self { taken: vec![false; n] }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&mut self, theta: &[f64], k: usize, rng: &mut R, out: &mut Vec<ItemId>) {
        debug_assert!(k <= theta.len());
        out.clear();
        self.taken.iter_mut().for_each(|t| *t = false);
        let mut remaining: f64 = theta.iter().sum();
        let mut exact = remaining;
        for _ in 0..k {
            let target = rng.random::<f64>() * remaining;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last_free = 0;
            for (idx, &w) in theta.iter().enumerate() {
                if self.taken[idx] {
                    continue;
                }
                last_free = idx;
                acc += w;
                if target < acc {
                    chosen = Some(idx);
                    break;
                }
            }
            // rounding can leave `target` just past the final interval
            let idx = chosen.unwrap_or(last_free);
            self.taken[idx] = true;
            out.push(ItemId(idx));
            remaining -= theta[idx];
            // resum once cancellation could dominate what is left
            if remaining < 0.5 * exact {
                remaining = theta.iter().zip(&self.taken).filter(|(_, t)| !**t).map(|(w, _)| w).sum();
                exact = remaining;
            }
        }
    }
}

/// Adds `alpha` to every weight before normalising.
///
/// Takes raw non-negative weights rather than a [`ScoreVector`] because zero
/// weights are legitimate input here: smoothing is what makes them positive.
pub fn laplace_smooth(theta: &[f64], alpha: f64) -> Result<SmoothedScoreVector, PlackettError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(PlackettError::NegativeAlpha(alpha));
    }
    if theta.is_empty() {
        return Err(PlackettError::Empty);
    }
    for &w in theta {
        if !w.is_finite() {
            return Err(PlackettError::NonFinite(w));
        }
        if w < 0.0 {
            return Err(PlackettError::NonPositiveWeight(w));
        }
    }
    let total: f64 = theta.iter().map(|w| w + alpha).sum();
    if total <= 0.0 {
        return Err(PlackettError::ZeroMass);
    }
    Ok(SmoothedScoreVector { probs: theta.iter().map(|w| (w + alpha) / total).collect(), alpha })
}

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[ItemId])) {
    let mut perm: Vec<ItemId> = (0..n).map(ItemId).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
