//! Rating-based versus comparison-based learning on semi-synthetic truth.
//!
//! A factorisation fitted to all ratings yields dense shadow ratings, and
//! each user's true ranking is one Plackett-Luce draw from their smoothed,
//! standardised shadow ratings. For each train fraction, the rating model
//! sees the shadow ratings of the training records and the comparison model
//! sees true-ranking answers for pairs of each user's training items. Both
//! are scored by Kendall tau of their item ordering against the truth.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{derive_seed, stream, ExperimentReport, ExperimentSpec, HarnessError, MetricRow};
use crate::datasets::{build_shadow_truth, load_movielens, split, subsample_ratings, synthetic_ratings, RatingData, RatingRecord, ShadowConfig, SplitSpec, SyntheticRatingsConfig};
use crate::metrics::{kendall_tau, RankedList};
use crate::models::{pairwise_loss, rating_mse, train_pairwise, train_rating_mse, MatrixFactorization, ScoreModel, TrainConfig};
use crate::prefcore::{ComparisonTriplet, GroundTruthRanking, ItemId, UserId};

pub const TAU_COMPARISON: &str = "tau_comparison";
pub const TAU_RATING: &str = "tau_rating";
pub const TRAIN_LL_COMPARISON: &str = "train_loglik_comparison";
pub const TRAIN_MSE_RATING: &str = "train_mse_rating";

pub fn run_appendix_study(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let file = match &spec.data {
        Some(path) => Some(subsample_ratings(&load_movielens(path)?, spec.max_users, spec.max_items)),
        None => None,
    };
    let parts = spec.seeds.par_iter().map(|&seed| seed_run(spec, file.as_ref(), seed)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentReport::merge(parts))
}

pub fn run_appendix_seed(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let file = match &spec.data {
        Some(path) => Some(subsample_ratings(&load_movielens(path)?, spec.max_users, spec.max_items)),
        None => None,
    };
    seed_run(spec, file.as_ref(), seed)
}

/// Mean over users of tau between the model's score order and the truth, over all items.
fn mean_tau<M: ScoreModel>(model: &M, truth: &[GroundTruthRanking], n_items: usize) -> Result<f64, HarnessError> {
    let items: Vec<ItemId> = (0..n_items).map(ItemId).collect();
    let mut total = 0.0;
    for (u, t) in truth.iter().enumerate() {
        let predicted = RankedList::from_scores(&items, &model.scores_for(UserId(u), &items))?;
        total += kendall_tau(&predicted, &RankedList::from_order(t.order())?)?;
    }
    Ok(total / truth.len() as f64)
}

/// True-ranking answers for up to `cap` random pairs of each user's training items.
fn truth_comparisons(train: &[RatingRecord], truth: &[GroundTruthRanking], cap: usize, seed: u64) -> Vec<ComparisonTriplet> {
    let mut by_user: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
    for r in train {
        by_user.entry(r.user).or_default().push(r.item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (user, mut items) in by_user {
        items.sort();
        items.dedup();
        let t = &truth[user.0];
        let mut pairs = Vec::new();
        for (a, &i) in items.iter().enumerate() {
            for &j in &items[a + 1..] {
                let (w, l) = if t.position_of(i).ok() < t.position_of(j).ok() { (i, j) } else { (j, i) };
                pairs.push(ComparisonTriplet { user, winner: w, loser: l });
            }
        }
        if pairs.len() > cap {
            let (chosen, _) = pairs.partial_shuffle(&mut rng, cap);
            let mut chosen = chosen.to_vec();
            chosen.sort_by_key(|t| (t.winner.min(t.loser), t.winner.max(t.loser)));
            pairs = chosen;
        }
        out.extend(pairs);
    }
    out
}

fn seed_run(spec: &ExperimentSpec, file: Option<&RatingData>, seed: u64) -> Result<ExperimentReport, HarnessError> {
    let data = match file {
        Some(d) => d.clone(),
        None => synthetic_ratings(&SyntheticRatingsConfig {
            n_users: spec.n_users,
            n_items: spec.n_items,
            rank: spec.shadow_dim,
            density: spec.density,
            seed: derive_seed(seed, stream::WORLD, 0),
            ..SyntheticRatingsConfig::default()
        })?,
    };
    let (n_users, n_items) = (data.n_users(), data.n_items());
    let shadow_cfg = ShadowConfig {
        latent_dim: spec.shadow_dim,
        alpha: spec.alpha,
        train: TrainConfig { seed: derive_seed(seed, stream::WORLD, 1), ..ShadowConfig::default().train },
    };
    let mut truth_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::WORLD, 2));
    let (shadow, truth) = build_shadow_truth(&data.ratings, n_users, n_items, &shadow_cfg, &mut truth_rng)?;
    let shadowed: Vec<RatingRecord> = data.ratings.iter().map(|r| RatingRecord { rating: shadow.shadow_rating(r.user, r.item), ..*r }).collect();

    let mut report = ExperimentReport::default();
    for (idx, &fraction) in spec.fractions.iter().enumerate() {
        let (train, _) = split(&shadowed, &SplitSpec { train_fraction: fraction, seed: derive_seed(seed, stream::SPLIT, idx as u64) })?;
        let cfg = |salt: u64| TrainConfig {
            learning_rate: spec.learning_rate,
            epochs: spec.epochs,
            l2_lambda: spec.l2_lambda,
            seed: derive_seed(seed, stream::TRAIN, salt),
            ..TrainConfig::default()
        };
        let init = |salt: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::INIT, salt));
            MatrixFactorization::new(n_users, n_items, spec.latent_dim, spec.init_std, &mut rng)
        };

        let mut rating_model = init(2 * idx as u64);
        train_rating_mse(&mut rating_model, &train, &cfg(2 * idx as u64))?;

        let comparisons = truth_comparisons(&train, &truth, spec.max_pairs_per_user, derive_seed(seed, stream::PRETRAIN, idx as u64));
        let mut comparison_model = init(2 * idx as u64 + 1);
        train_pairwise(&mut comparison_model, &comparisons, &cfg(2 * idx as u64 + 1))?;

        let queries = train.len();
        let row = |value: f64| MetricRow { seed, round: idx, queries, value };
        report.push(TAU_RATING, row(mean_tau(&rating_model, &truth, n_items)?));
        report.push(TAU_COMPARISON, row(mean_tau(&comparison_model, &truth, n_items)?));
        report.push(TRAIN_MSE_RATING, row(rating_mse(&rating_model, &train)));
        let ll = if comparisons.is_empty() { 0.0 } else { pairwise_loss(&comparison_model, &comparisons)? / comparisons.len() as f64 };
        report.push(TRAIN_LL_COMPARISON, row(ll));
    }
    Ok(report)
}
