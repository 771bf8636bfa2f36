//! Single decision-maker selecting a top-k shortlist from feature-described
//! candidates, scored by Precision@k and NDCG@k of the model's ordering.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{derive_seed, stream, ExperimentReport, ExperimentSpec, HarnessError, MetricRow, RetrainMode, Strategy};
use crate::datasets::{bundled_admissions, load_admissions, AdmissionsData};
use crate::metrics::{ndcg_at_k, precision_at_k};
use crate::models::{train_pairwise, NeuralConfig, NeuralPreferenceModel, ScoreModel, TrainConfig};
use crate::prefcore::{ComparisonTriplet, ItemId, UserId};
use crate::sampler::{cluster_queries, entropy_query, random_query, simulate_oracle, utility_gain_query, QueryContext, QueryPair, QueryPool, SamplerConfig};
use crate::utility::{AdmissionsUtility, McConfig};

/// Metric names for cutoff `k`, e.g. `precision_at_10` and `ndcg_at_10`.
pub fn metric_names(k: usize) -> (String, String) {
    (format!("precision_at_{k}"), format!("ndcg_at_{k}"))
}

const USER: UserId = UserId(0);

#[derive(Debug, Clone)]
pub struct AdmissionsSeedResult {
    pub report: ExperimentReport,
    pub training: Vec<ComparisonTriplet>,
    pub initial_len: usize,
}

fn load(spec: &ExperimentSpec) -> Result<AdmissionsData, HarnessError> {
    Ok(match &spec.data {
        Some(path) => load_admissions(path)?,
        None => bundled_admissions(),
    })
}

pub fn run_admissions(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let data = load(spec)?;
    let parts = spec.seeds.par_iter().map(|&seed| run_with_data(spec, &data, seed).map(|r| r.report)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentReport::merge(parts))
}

pub fn run_admissions_seed(spec: &ExperimentSpec, seed: u64) -> Result<AdmissionsSeedResult, HarnessError> {
    spec.validate()?;
    run_with_data(spec, &load(spec)?, seed)
}

/// Item ids sorted by descending score, ties by id.
fn ranked_items<M: ScoreModel>(model: &M, n: usize) -> Vec<ItemId> {
    let scores: Vec<f64> = (0..n).map(|i| model.score(USER, ItemId(i))).collect();
    let mut order: Vec<ItemId> = (0..n).map(ItemId).collect();
    order.sort_by(|a, b| scores[b.0].total_cmp(&scores[a.0]).then(a.cmp(b)));
    order
}

fn run_with_data(spec: &ExperimentSpec, data: &AdmissionsData, seed: u64) -> Result<AdmissionsSeedResult, HarnessError> {
    let n = data.len();
    let k = spec.top_k;
    if k > n || n < 2 {
        return Err(HarnessError::Spec(format!("top_k {k} needs at least that many of the {n} candidates")));
    }
    let features = data.features();
    let relevant: HashSet<ItemId> = data.truth.top(k).iter().copied().collect();
    let gains: HashMap<ItemId, f64> = relevant.iter().map(|&i| (i, 1.0)).collect();
    let universe: Vec<ItemId> = (0..n).map(ItemId).collect();

    let config = NeuralConfig { embed_dim: spec.embed_dim, hidden: spec.hidden, noise_dim: spec.noise_dim, train_with_noise: spec.noise_dim > 0 };
    let fresh = |salt: u64| -> Result<NeuralPreferenceModel, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::INIT, salt));
        Ok(NeuralPreferenceModel::new(1, n, Some((features.dim(), features.as_slice().to_vec())), config.clone(), spec.init_std, &mut rng)?)
    };
    let train_cfg = |epochs: usize, salt: u64| TrainConfig {
        learning_rate: spec.learning_rate,
        epochs,
        l2_lambda: spec.l2_lambda,
        seed: derive_seed(seed, stream::TRAIN, salt),
        ..TrainConfig::default()
    };

    let mut pool = QueryPool::new(USER, universe.clone());
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::PRETRAIN, 0));
    let mut training = Vec::new();
    for pair in pool.draw(spec.initial_comparisons, &mut init_rng) {
        training.push(simulate_oracle(&data.truth, &pair)?);
        pool.mark_asked(&pair);
    }
    let initial_len = training.len();
    let mut model = fresh(0)?;
    train_pairwise(&mut model, &training, &train_cfg(spec.epochs, 0))?;

    let mut cluster_seq: std::vec::IntoIter<QueryPair> = if spec.strategy == Strategy::Cluster {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::SELECT, 1));
        let want = spec.rounds * spec.queries_per_round + initial_len;
        cluster_queries(USER, &features, want, spec.n_clusters, &mut rng)?.into_iter()
    } else {
        Vec::new().into_iter()
    };

    let utility = AdmissionsUtility { k };
    let mut select_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::SELECT, 0));
    let mut pool_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::POOL, 0));
    let mut report = ExperimentReport::default();
    let mut asked = 0usize;
    let (precision_name, ndcg_name) = metric_names(k);
    for round in 0..=spec.rounds {
        if spec.is_eval_round(round) {
            let order = ranked_items(&model, n);
            let p = precision_at_k(&order, &relevant, k)?;
            let g = ndcg_at_k(&order, &gains, k)?;
            report.push(&precision_name, MetricRow { seed, round, queries: asked, value: p });
            report.push(&ndcg_name, MetricRow { seed, round, queries: asked, value: g });
        }
        if round == spec.rounds {
            break;
        }
        let mut new = Vec::new();
        for slot in 0..spec.queries_per_round {
            if spec.strategy == Strategy::None || pool.is_exhausted() {
                break;
            }
            let tag = (round * spec.queries_per_round + slot) as u64;
            let pair = match spec.strategy {
                Strategy::Utility => {
                    let candidates = pool.draw(spec.pool_size, &mut pool_rng);
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
                        menu_size: k,
                        seed: derive_seed(seed, stream::SELECT, tag + 2),
                    };
                    let ctx = QueryContext { user: USER, universe: &universe, history: &training };
                    utility_gain_query(&model, &ctx, &candidates, &utility, &cfg)?
                }
                Strategy::Entropy => entropy_query(&model, &pool.remaining_pairs())?,
                Strategy::Random => random_query(&pool.remaining_pairs(), &mut select_rng)?,
                Strategy::Cluster => match cluster_seq.by_ref().find(|p| !pool.was_asked(p)) {
                    Some(p) => p,
                    None => random_query(&pool.remaining_pairs(), &mut select_rng)?,
                },
                Strategy::None => unreachable!("loop exits above"),
            };
            let t = simulate_oracle(&data.truth, &pair)?;
            pool.mark_asked(&pair);
            new.push(t);
        }
        asked += new.len();
        training.extend_from_slice(&new);
        match spec.retrain {
            RetrainMode::Finetune => {
                train_pairwise(&mut model, &training, &train_cfg(spec.round_epochs, round as u64 + 1))?;
            }
            RetrainMode::Scratch => {
                model = fresh(round as u64 + 1)?;
                train_pairwise(&mut model, &training, &train_cfg(spec.epochs, round as u64 + 1))?;
            }
        }
    }
    Ok(AdmissionsSeedResult { report, training, initial_len })
}
