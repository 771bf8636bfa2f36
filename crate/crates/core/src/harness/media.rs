//! Multi-user elicitation with held-out test items, scored by where the
//! recommended menu's best item sits in each user's true ranking.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{derive_seed, stream, ExperimentReport, ExperimentSpec, HarnessError, MetricRow, RetrainMode, Strategy, UserSelection};
use crate::datasets::{build_shadow_truth, holdout_items, load_movielens, subsample_ratings, sample_truth_ranking, ShadowConfig};
use crate::metrics::max_rank_percentile;
use crate::models::{train_pairwise, MatrixFactorization, TrainConfig};
use crate::prefcore::{ComparisonTriplet, GroundTruthRanking, ItemId, UserId};
use crate::sampler::{entropy_query, random_query, recommend, simulate_oracle, utility_gain_query, QueryContext, QueryPool, SamplerConfig};
use crate::utility::{McConfig, MediaUtility};

pub const METRIC: &str = "max_rank_percentile";

/// Users' true rankings over a shared item catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaWorld {
    pub n_users: usize,
    pub n_items: usize,
    pub truth: Vec<GroundTruthRanking>,
}

/// Synthetic world: `s_ui = q_i + x_u . y_i` with a rank-2 taste term, and
/// each user's truth one full Plackett-Luce draw from `exp(s_ui)`.
pub fn synthetic_media_world(n_users: usize, n_items: usize, seed: u64) -> Result<MediaWorld, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let taste = Normal::new(0.0, 0.5f64.sqrt()).expect("finite std");
    let quality: Vec<f64> = (0..n_items).map(|_| std_normal.sample(&mut rng)).collect();
    let y: Vec<[f64; 2]> = (0..n_items).map(|_| [taste.sample(&mut rng), taste.sample(&mut rng)]).collect();
    let mut truth = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let x = [std_normal.sample(&mut rng), std_normal.sample(&mut rng)];
        let weights: Vec<f64> = (0..n_items).map(|i| (quality[i] + x[0] * y[i][0] + x[1] * y[i][1]).exp()).collect();
        truth.push(sample_truth_ranking(&weights, 0.0, &mut rng).map_err(HarnessError::Data)?);
    }
    Ok(MediaWorld { n_users, n_items, truth })
}

fn ratings_world(spec: &ExperimentSpec, seed: u64) -> Result<MediaWorld, HarnessError> {
    let path = spec.data.as_ref().expect("called with a data path");
    let data = subsample_ratings(&load_movielens(path)?, spec.max_users, spec.max_items);
    let (n_users, n_items) = (data.n_users(), data.n_items());
    let cfg = ShadowConfig { latent_dim: spec.shadow_dim, alpha: spec.alpha, ..ShadowConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::WORLD, 0));
    let (_, truth) = build_shadow_truth(&data.ratings, n_users, n_items, &cfg, &mut rng)?;
    Ok(MediaWorld { n_users, n_items, truth })
}

/// Everything one seed produced, for inspection beyond the metric curve.
#[derive(Debug, Clone)]
pub struct MediaSeedResult {
    pub report: ExperimentReport,
    pub test_items: Vec<Vec<ItemId>>,
    /// Pretraining comparisons followed by every answered query, in order.
    pub training: Vec<ComparisonTriplet>,
    pub pretrain_len: usize,
    pub queries_per_round: Vec<usize>,
}

pub fn run_media(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    let parts = spec.seeds.par_iter().map(|&seed| run_media_seed(spec, seed).map(|r| r.report)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentReport::merge(parts))
}

fn fresh_model(spec: &ExperimentSpec, n_users: usize, n_items: usize, seed: u64, salt: u64) -> MatrixFactorization {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::INIT, salt));
    MatrixFactorization::new(n_users, n_items, spec.latent_dim, spec.init_std, &mut rng)
}

pub fn run_media_seed(spec: &ExperimentSpec, seed: u64) -> Result<MediaSeedResult, HarnessError> {
    spec.validate()?;
    let world = match spec.data {
        Some(_) => ratings_world(spec, seed)?,
        None => synthetic_media_world(spec.n_users, spec.n_items, derive_seed(seed, stream::WORLD, 0))?,
    };
    let (n_users, n_items) = (world.n_users, world.n_items);
    if spec.test_items + 2 > n_items {
        return Err(HarnessError::Spec(format!("test_items {} too large for {n_items} items", spec.test_items)));
    }
    let test_items = holdout_items(n_users, n_items, spec.test_items, derive_seed(seed, stream::HOLDOUT, 0))?;
    let test_truth = world
        .truth
        .iter()
        .zip(&test_items)
        .map(|(t, items)| t.restrict(items))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Spec(e.to_string()))?;

    let mut pools: Vec<QueryPool> = test_items
        .iter()
        .enumerate()
        .map(|(u, test)| {
            let train: Vec<ItemId> = (0..n_items).map(ItemId).filter(|i| test.binary_search(i).is_err()).collect();
            QueryPool::new(UserId(u), train)
        })
        .collect();

    let mut per_user: Vec<Vec<ComparisonTriplet>> = vec![Vec::new(); n_users];
    let mut training = Vec::new();
    let mut pre_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::PRETRAIN, 0));
    for (u, pool) in pools.iter_mut().enumerate() {
        for pair in pool.draw(spec.pretrain_per_user, &mut pre_rng) {
            let t = simulate_oracle(&world.truth[u], &pair)?;
            pool.mark_asked(&pair);
            per_user[u].push(t);
            training.push(t);
        }
    }
    let pretrain_len = training.len();

    let train_cfg = |epochs: usize, salt: u64| TrainConfig {
        learning_rate: spec.learning_rate,
        epochs,
        l2_lambda: spec.l2_lambda,
        seed: derive_seed(seed, stream::TRAIN, salt),
        ..TrainConfig::default()
    };
    let mut model = fresh_model(spec, n_users, n_items, seed, 0);
    train_pairwise(&mut model, &training, &train_cfg(spec.epochs, 0))?;

    let utility = MediaUtility::default();
    let mut report = ExperimentReport::default();
    let evaluate = |model: &MatrixFactorization, round: usize| -> Result<f64, HarnessError> {
        let mc = McConfig { samples: spec.eval_samples, seed: derive_seed(seed, stream::EVAL, round as u64), ..McConfig::default() };
        let mut total = 0.0;
        for u in 0..n_users {
            let choice = recommend(model, UserId(u), &test_items[u], &utility, spec.menu_size, &mc)?;
            total += max_rank_percentile(&choice.menu, &test_truth[u])?;
        }
        Ok(total / n_users as f64)
    };

    let mut select_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::SELECT, 0));
    let mut pool_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::POOL, 0));
    let mut user_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::USERS, 0));
    let mut queries_per_round = Vec::with_capacity(spec.rounds);
    let mut asked = 0usize;
    for round in 0..=spec.rounds {
        if spec.is_eval_round(round) {
            report.push(METRIC, MetricRow { seed, round, queries: asked, value: evaluate(&model, round)? });
        }
        if round == spec.rounds {
            break;
        }
        let q = spec.queries_per_round.min(n_users);
        let users: Vec<usize> = match spec.user_selection {
            UserSelection::RoundRobin => (0..q).map(|k| (round * spec.queries_per_round + k) % n_users).collect(),
            UserSelection::Random => {
                let mut v = index::sample(&mut user_rng, n_users, q).into_vec();
                v.sort_unstable();
                v
            }
        };
        let mut new = Vec::new();
        if spec.strategy != Strategy::None {
            for (slot, &u) in users.iter().enumerate() {
                let pool = &pools[u];
                if pool.is_exhausted() {
                    continue;
                }
                let candidates = pool.draw(spec.pool_size, &mut pool_rng);
                let tag = (round * n_users + slot) as u64;
                let pair = match spec.strategy {
                    Strategy::Utility => {
                        let cfg = SamplerConfig {
                            pool_size: spec.pool_size,
                            mc: McConfig { samples: spec.mc_samples, seed: derive_seed(seed, stream::MC, tag), ..McConfig::default() },
                            finetune: TrainConfig {
                                learning_rate: spec.finetune_learning_rate,
                                epochs: spec.finetune_epochs,
                                l2_lambda: spec.l2_lambda,
                                seed: derive_seed(seed, stream::FINETUNE, tag),
                                ..TrainConfig::default()
                            },
                            replay: spec.replay,
                            menu_size: spec.menu_size,
                            seed: derive_seed(seed, stream::SELECT, tag),
                        };
                        let ctx = QueryContext { user: UserId(u), universe: &test_items[u], history: &per_user[u] };
                        utility_gain_query(&model, &ctx, &candidates, &utility, &cfg)?
                    }
                    Strategy::Entropy => entropy_query(&model, &candidates)?,
                    Strategy::Random => random_query(&candidates, &mut select_rng)?,
                    Strategy::Cluster | Strategy::None => unreachable!("rejected by validation / skipped above"),
                };
                let t = simulate_oracle(&world.truth[u], &pair)?;
                pools[u].mark_asked(&pair);
                per_user[u].push(t);
                new.push(t);
            }
        }
        asked += new.len();
        queries_per_round.push(new.len());
        training.extend_from_slice(&new);
        match spec.retrain {
            RetrainMode::Finetune => {
                train_pairwise(&mut model, &training, &train_cfg(spec.round_epochs, round as u64 + 1))?;
            }
            RetrainMode::Scratch => {
                model = fresh_model(spec, n_users, n_items, seed, round as u64 + 1);
                train_pairwise(&mut model, &training, &train_cfg(spec.epochs, round as u64 + 1))?;
            }
        }
    }
    Ok(MediaSeedResult { report, test_items, training, pretrain_len, queries_per_round })
}
