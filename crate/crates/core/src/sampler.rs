//! Query selection: which pair of items to ask a user about next.
//!
//! [`utility_gain_query`] scores each candidate pair by how much answering it
//! is expected to improve the recommended menu:
//!
//! ```text
//! score(i, j) = p * gain(i > j) + (1 - p) * gain(j > i),   p = sigmoid(s_ui - s_uj)
//! gain(q)     = U(best_menu(theta|q) | theta|q) - U(best_menu(theta) | theta|q)
//! ```
//!
//! where `theta|q` is the model after a short fine-tune on the hypothetical
//! answer `q`. All candidates of one selection share the same fine-tune seed,
//! replay sample and ranking-sample seed, so pairs that do not move the menu
//! score exactly zero instead of picking up sampling noise.
//!
//! The baselines ([`entropy_query`], [`random_query`], [`cluster_queries`])
//! and the simulated oracle live here as well.

use std::collections::HashSet;

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{clone_and_finetune, ModelError, ScoreModel, TrainConfig};
use crate::plackett::{sigmoid, PlackettError, ScoreVector};
use crate::prefcore::{ComparisonTriplet, GroundTruthRanking, ItemId, Menu, PrefError, UserId};
use crate::utility::{McConfig, RankingSample, UtilityError, UtilityFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("query pool is empty")]
    EmptyPool,
    #[error("a query pair needs two distinct items, got {0} twice")]
    SamePair(ItemId),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("{0} is not ranked in the ground truth")]
    Unranked(ItemId),
    #[error("invalid candidate features: {0}")]
    Features(String),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plackett(#[from] PlackettError),
    #[error(transparent)]
    Pref(#[from] PrefError),
}

/// An unordered item pair to show `user`, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryPair {
    pub user: UserId,
    pub i: ItemId,
    pub j: ItemId,
}

impl QueryPair {
    pub fn new(user: UserId, a: ItemId, b: ItemId) -> Result<Self, SamplerError> {
        if a == b {
            return Err(SamplerError::SamePair(a));
        }
        Ok(Self { user, i: a.min(b), j: a.max(b) })
    }

    /// The triplet recording `winner` as preferred; `None` if `winner` is not in the pair.
    pub fn answer(&self, winner: ItemId) -> Option<ComparisonTriplet> {
        let loser = if winner == self.i {
            self.j
        } else if winner == self.j {
            self.i
        } else {
            return None;
        };
        Some(ComparisonTriplet { user: self.user, winner, loser })
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.i == item || self.j == item
    }

    fn key(&self) -> (ItemId, ItemId) {
        (self.i, self.j)
    }
}

/// Row-major `n_items x dim` item feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatures {
    n_items: usize,
    dim: usize,
    data: Vec<f64>,
}

impl CandidateFeatures {
    pub fn new(n_items: usize, dim: usize, data: Vec<f64>) -> Result<Self, SamplerError> {
        if data.len() != n_items * dim {
            return Err(SamplerError::Features(format!("{} values for {n_items} x {dim}", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(SamplerError::Features("non-finite entry".into()));
        }
        Ok(Self { n_items, dim, data })
    }

    pub fn len(&self) -> usize {
        self.n_items
    }

    pub fn is_empty(&self) -> bool {
        self.n_items == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, item: ItemId) -> &[f64] {
        &self.data[item.0 * self.dim..(item.0 + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_parts(self) -> (usize, Vec<f64>) {
        (self.dim, self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Candidate pairs scored per selection.
    pub pool_size: usize,
    pub mc: McConfig,
    /// Hypothetical fine-tune applied for each possible answer.
    pub finetune: TrainConfig,
    /// Past comparisons replayed alongside the hypothetical one.
    pub replay: usize,
    pub menu_size: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            pool_size: 100,
            mc: McConfig { samples: 500, ..McConfig::default() },
            finetune: TrainConfig { epochs: 5, ..TrainConfig::default() },
            replay: 20,
            menu_size: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.pool_size == 0 {
            return Err(SamplerError::InvalidConfig("pool_size must be at least 1".into()));
        }
        if self.menu_size == 0 {
            return Err(SamplerError::InvalidConfig("menu_size must be at least 1".into()));
        }
        self.mc.validate()?;
        self.finetune.validate()?;
        Ok(())
    }
}

/// What the selector knows about the user being queried.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub user: UserId,
    /// Items the menu is chosen from.
    pub universe: &'a [ItemId],
    /// Comparisons observed so far; the replay sample is drawn from these.
    pub history: &'a [ComparisonTriplet],
}

/// A scored candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub pair: QueryPair,
    /// Model probability that `pair.i` wins.
    pub p: f64,
    /// Gains for the answers `i > j` and `j > i`.
    pub gains: [f64; 2],
    pub score: f64,
}

/// Recommended menu (in universe order, as global ids) and its expected utility.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuChoice {
    pub menu: Menu,
    pub expected_utility: f64,
}

fn universe_scores<M: ScoreModel>(model: &M, user: UserId, universe: &[ItemId]) -> Result<ScoreVector, SamplerError> {
    Ok(ScoreVector::from_log_scores(&model.scores_for(user, universe))?)
}

fn to_global(local: &Menu, universe: &[ItemId]) -> Menu {
    Menu::from_items(local.items().iter().map(|i| universe[i.0]), local.capacity()).expect("distinct local ids map to distinct items")
}

/// Greedy menu over `universe` for `user` and its estimated expected utility.
pub fn recommend<M: ScoreModel>(model: &M, user: UserId, universe: &[ItemId], utility: &dyn UtilityFunction, menu_size: usize, mc: &McConfig) -> Result<MenuChoice, SamplerError> {
    let scores = universe_scores(model, user, universe)?;
    let (local, value) = RankingSample::for_config(&scores, utility, mc)?.greedy_menu(utility, menu_size)?;
    Ok(MenuChoice { menu: to_global(&local, universe), expected_utility: value })
}

fn replay_sample(history: &[ComparisonTriplet], n: usize, seed: u64) -> Vec<ComparisonTriplet> {
    if history.len() <= n {
        return history.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, history.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|k| history[k]).collect()
}

/// Scores every pool pair by expected utility gain, in pool order.
pub fn score_candidates<M: ScoreModel>(
    model: &M,
    ctx: &QueryContext<'_>,
    pool: &[QueryPair],
    utility: &dyn UtilityFunction,
    cfg: &SamplerConfig,
) -> Result<Vec<CandidateScore>, SamplerError> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    let n = ctx.universe.len();
    if cfg.menu_size > n {
        return Err(UtilityError::MenuSize { size: cfg.menu_size, n }.into());
    }
    let before_scores = universe_scores(model, ctx.user, ctx.universe)?;
    let (m_before, _) = RankingSample::for_config(&before_scores, utility, &cfg.mc)?.greedy_menu(utility, cfg.menu_size)?;
    let replay = replay_sample(ctx.history, cfg.replay, cfg.seed);

    let gain = |pair: &QueryPair, winner: ItemId| -> Result<f64, SamplerError> {
        let t = pair.answer(winner).expect("winner drawn from the pair");
        model.check_triplet(&t)?;
        let tuned = clone_and_finetune(model, &t, &replay, &cfg.finetune);
        let scores = universe_scores(&tuned, ctx.user, ctx.universe)?;
        let sample = RankingSample::for_config(&scores, utility, &cfg.mc)?;
        let (_, after_value) = sample.greedy_menu(utility, cfg.menu_size)?;
        let before_value = sample.expected_utility(&m_before, utility)?;
        Ok(after_value - before_value)
    };

    pool.par_iter()
        .map(|pair| {
            let p = sigmoid(model.score(pair.user, pair.i) - model.score(pair.user, pair.j));
            let gains = [gain(pair, pair.i)?, gain(pair, pair.j)?];
            Ok(CandidateScore { pair: *pair, p, gains, score: p * gains[0] + (1.0 - p) * gains[1] })
        })
        .collect()
}

/// Index of the best candidate: highest score, then the canonically smallest pair.
fn argmax_canonical<T>(items: &[T], better: impl Fn(&T, &T) -> std::cmp::Ordering, key: impl Fn(&T) -> (ItemId, ItemId)) -> usize {
    let mut best = 0;
    for k in 1..items.len() {
        match better(&items[k], &items[best]) {
            std::cmp::Ordering::Greater => best = k,
            std::cmp::Ordering::Equal if key(&items[k]) < key(&items[best]) => best = k,
            _ => {}
        }
    }
    best
}

/// The pool pair with the largest expected utility gain.
pub fn utility_gain_query<M: ScoreModel>(
    model: &M,
    ctx: &QueryContext<'_>,
    pool: &[QueryPair],
    utility: &dyn UtilityFunction,
    cfg: &SamplerConfig,
) -> Result<QueryPair, SamplerError> {
    let scored = score_candidates(model, ctx, pool, utility, cfg)?;
    let best = argmax_canonical(&scored, |a, b| a.score.total_cmp(&b.score), |c| c.pair.key());
    Ok(scored[best].pair)
}

/// Binary entropy of a Bernoulli(p) outcome, in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// The pool pair whose outcome the model is least sure about.
pub fn entropy_query<M: ScoreModel>(model: &M, pool: &[QueryPair]) -> Result<QueryPair, SamplerError> {
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    // |s_i - s_j| orders pairs exactly like the entropy without the rounding of sigmoid
    let margins: Vec<(QueryPair, f64)> = pool.iter().map(|q| (*q, (model.score(q.user, q.i) - model.score(q.user, q.j)).abs())).collect();
    let best = argmax_canonical(&margins, |a, b| b.1.total_cmp(&a.1), |m| m.0.key());
    Ok(margins[best].0)
}

pub fn random_query<R: Rng + ?Sized>(pool: &[QueryPair], rng: &mut R) -> Result<QueryPair, SamplerError> {
    pool.choose(rng).copied().ok_or(SamplerError::EmptyPool)
}

/// The answer implied by a ground-truth ranking: the better-placed item wins.
pub fn simulate_oracle(truth: &GroundTruthRanking, pair: &QueryPair) -> Result<ComparisonTriplet, SamplerError> {
    let pi = truth.position_of(pair.i).map_err(|_| SamplerError::Unranked(pair.i))?;
    let pj = truth.position_of(pair.j).map_err(|_| SamplerError::Unranked(pair.j))?;
    let (winner, loser) = if pi < pj { (pair.i, pair.j) } else { (pair.j, pair.i) };
    Ok(ComparisonTriplet { user: pair.user, winner, loser })
}

/// Unordered pairs over a fixed item set that have not been asked yet.
#[derive(Debug, Clone)]
pub struct QueryPool {
    user: UserId,
    items: Vec<ItemId>,
    asked: HashSet<(ItemId, ItemId)>,
}

impl QueryPool {
    pub fn new(user: UserId, mut items: Vec<ItemId>) -> Self {
        items.sort();
        items.dedup();
        Self { user, items, asked: HashSet::new() }
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn total_pairs(&self) -> usize {
        self.items.len() * self.items.len().saturating_sub(1) / 2
    }

    pub fn remaining(&self) -> usize {
        self.total_pairs() - self.asked.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    pub fn was_asked(&self, pair: &QueryPair) -> bool {
        self.asked.contains(&pair.key())
    }

    /// Removes the pair for good. Returns `false` if it was already removed
    /// or is not a pair over this pool's items.
    pub fn mark_asked(&mut self, pair: &QueryPair) -> bool {
        if pair.user != self.user || self.items.binary_search(&pair.i).is_err() || self.items.binary_search(&pair.j).is_err() {
            return false;
        }
        self.asked.insert(pair.key())
    }

    /// Every remaining pair in canonical order.
    pub fn remaining_pairs(&self) -> Vec<QueryPair> {
        let mut out = Vec::with_capacity(self.remaining());
        for (a, &i) in self.items.iter().enumerate() {
            for &j in &self.items[a + 1..] {
                if !self.asked.contains(&(i, j)) {
                    out.push(QueryPair { user: self.user, i, j });
                }
            }
        }
        out
    }

    /// Up to `size` distinct remaining pairs drawn uniformly, in canonical order.
    pub fn draw<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<QueryPair> {
        let remaining = self.remaining();
        if size >= remaining {
            return self.remaining_pairs();
        }
        let mut out: Vec<QueryPair> = if size * 4 < remaining {
            let mut seen = HashSet::with_capacity(size);
            let n = self.items.len();
            while seen.len() < size {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a == b {
                    continue;
                }
                let key = (self.items[a.min(b)], self.items[a.max(b)]);
                if !self.asked.contains(&key) {
                    seen.insert(key);
                }
            }
            seen.into_iter().map(|(i, j)| QueryPair { user: self.user, i, j }).collect()
        } else {
            let all = self.remaining_pairs();
            index::sample(rng, all.len(), size).into_iter().map(|k| all[k]).collect()
        };
        out.sort();
        out
    }
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from `k` distinct random points. An emptied cluster is
/// re-seeded with the point farthest from its centroid.
pub fn kmeans<R: Rng + ?Sized>(features: &CandidateFeatures, k: usize, max_iter: usize, rng: &mut R) -> Result<Clustering, SamplerError> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(SamplerError::InvalidConfig(format!("cannot form {k} clusters from {n} items")));
    }
    let mut centroids: Vec<Vec<f64>> = index::sample(rng, n, k).into_iter().map(|i| features.row(ItemId(i)).to_vec()).collect();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let x = features.row(ItemId(i));
            let best = (0..k).min_by(|&a, &b| sq_dist(x, &centroids[a]).total_cmp(&sq_dist(x, &centroids[b]))).expect("k >= 1");
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; features.dim()]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            sums[c].iter_mut().zip(features.row(ItemId(i))).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(features.row(ItemId(a)), &centroids[assignment[a]]);
                        let db = sq_dist(features.row(ItemId(b)), &centroids[assignment[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                centroids[c] = features.row(ItemId(far)).to_vec();
                assignment[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Clustering { centroids, assignment })
}

/// A non-adaptive query sequence from K-means clusters of the item features.
///
/// Cycles over the distinct cluster pairs `(a, b)`; each visit emits the
/// not-yet-emitted cross pair whose members lie closest to their centroids
/// (smallest sum of distances). Cluster pairs with nothing left are skipped.
/// When the features cannot form `n_clusters` distinct clusters, the
/// sequence falls back to uniformly random pairs.
pub fn cluster_queries<R: Rng + ?Sized>(
    user: UserId,
    features: &CandidateFeatures,
    n_queries: usize,
    n_clusters: usize,
    rng: &mut R,
) -> Result<Vec<QueryPair>, SamplerError> {
    if n_clusters < 2 {
        return Err(SamplerError::InvalidConfig("cluster_queries needs at least 2 clusters".into()));
    }
    let n = features.len();
    if n < n_clusters {
        return Err(SamplerError::InvalidConfig(format!("{n} items cannot form {n_clusters} clusters")));
    }
    if n_queries == 0 {
        return Ok(Vec::new());
    }
    let pool = QueryPool::new(user, (0..n).map(ItemId).collect());
    let n_queries = n_queries.min(pool.total_pairs());

    let mut distinct: Vec<&[f64]> = Vec::new();
    for i in 0..n {
        let row = features.row(ItemId(i));
        if !distinct.iter().any(|d| *d == row) {
            distinct.push(row);
            if distinct.len() >= n_clusters {
                break;
            }
        }
    }
    if distinct.len() < n_clusters {
        log::warn!("item features have fewer than {n_clusters} distinct points; using random query pairs");
        let mut pairs = pool.remaining_pairs();
        let (chosen, _) = rand::seq::SliceRandom::partial_shuffle(pairs.as_mut_slice(), rng, n_queries);
        return Ok(chosen.to_vec());
    }

    let clustering = kmeans(features, n_clusters, 100, rng)?;
    let dist: Vec<f64> = (0..n).map(|i| sq_dist(features.row(ItemId(i)), &clustering.centroids[clustering.assignment[i]]).sqrt()).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        members[c].push(i);
    }
    let mut cross: Vec<(usize, usize, Vec<(f64, QueryPair)>)> = Vec::new();
    for a in 0..n_clusters {
        for b in a + 1..n_clusters {
            let mut cand: Vec<(f64, QueryPair)> = Vec::with_capacity(members[a].len() * members[b].len());
            for &x in &members[a] {
                for &y in &members[b] {
                    let pair = QueryPair::new(user, ItemId(x), ItemId(y)).expect("distinct clusters hold distinct items");
                    cand.push((dist[x] + dist[y], pair));
                }
            }
            // pop from the back: farthest first in the vector
            cand.sort_by(|p, q| q.0.total_cmp(&p.0).then(q.1.cmp(&p.1)));
            if !cand.is_empty() {
                cross.push((a, b, cand));
            }
        }
    }
    let mut out = Vec::with_capacity(n_queries);
    let mut seen = HashSet::new();
    while out.len() < n_queries && !cross.is_empty() {
        cross.retain_mut(|(_, _, cand)| {
            if out.len() >= n_queries {
                return true;
            }
            if let Some((_, pair)) = cand.pop() {
                if seen.insert(pair.key()) {
                    out.push(pair);
                }
            }
            !cand.is_empty()
        });
    }
    if out.len() < n_queries {
        // every cross pair used: continue with within-cluster pairs in random order
        let mut rest: Vec<QueryPair> = pool.remaining_pairs().into_iter().filter(|p| !seen.contains(&p.key())).collect();
        let need = n_queries - out.len();
        let (chosen, _) = rand::seq::SliceRandom::partial_shuffle(rest.as_mut_slice(), rng, need);
        out.extend_from_slice(chosen);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MatrixFactorization;
    use crate::utility::AdmissionsUtility;

    fn pair(i: usize, j: usize) -> QueryPair {
        QueryPair::new(UserId(0), ItemId(i), ItemId(j)).unwrap()
    }

    /// One user whose item scores are `s` (K = 1, user factor 1).
    fn fixed_scores(s: &[f64]) -> MatrixFactorization {
        let mut params = vec![1.0];
        params.extend_from_slice(s);
        MatrixFactorization::from_params(1, s.len(), 1, params).unwrap()
    }

    #[test]
    fn query_pair_is_canonical() {
        let q = QueryPair::new(UserId(2), ItemId(7), ItemId(3)).unwrap();
        assert_eq!((q.i, q.j), (ItemId(3), ItemId(7)));
        assert!(QueryPair::new(UserId(0), ItemId(1), ItemId(1)).is_err());
        assert_eq!(q.answer(ItemId(7)).unwrap().loser, ItemId(3));
        assert!(q.answer(ItemId(5)).is_none());
    }

    #[test]
    fn entropy_examples() {
        // p = 0.9, 0.6, 0.99 for pairs (0,1), (2,3), (4,5)
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let m = fixed_scores(&[logit(0.9), 0.0, logit(0.6), 0.0, logit(0.99), 0.0]);
        assert_eq!(entropy_query(&m, &[pair(0, 1), pair(2, 3), pair(4, 5)]).unwrap(), pair(2, 3));
        let m = fixed_scores(&[0.0, 0.0, 0.5, 0.5]);
        assert_eq!(entropy_query(&m, &[pair(2, 3), pair(0, 1)]).unwrap(), pair(0, 1));
        let m = fixed_scores(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(entropy_query(&m, &[pair(1, 3), pair(0, 2), pair(2, 3)]).unwrap(), pair(0, 2));
        assert_eq!(entropy_query(&m, &[]), Err(SamplerError::EmptyPool));
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(binary_entropy(1.0), 0.0);
    }

    #[test]
    fn random_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_query(&[pair(0, 1)], &mut rng).unwrap(), pair(0, 1));
        assert_eq!(random_query(&[], &mut rng), Err(SamplerError::EmptyPool));
        let pool: Vec<_> = (1..=10).map(|j| pair(0, j)).collect();
        let a: Vec<_> = (0..20).map(|_| random_query(&pool, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn oracle_examples() {
        let truth = GroundTruthRanking::from_order([5, 2, 8, 1, 0, 3, 9].map(ItemId).to_vec()).unwrap();
        // positions: 2 -> 2, 9 -> 7
        let t = simulate_oracle(&truth, &pair(2, 9)).unwrap();
        assert_eq!((t.winner, t.loser), (ItemId(2), ItemId(9)));
        let t = simulate_oracle(&truth, &pair(0, 5)).unwrap();
        assert_eq!((t.winner, t.loser), (ItemId(5), ItemId(0)));
        assert_eq!(simulate_oracle(&truth, &pair(2, 4)), Err(SamplerError::Unranked(ItemId(4))));
    }

    fn small_cfg(epochs: usize) -> SamplerConfig {
        SamplerConfig {
            pool_size: 10,
            mc: McConfig { samples: 200, seed: 4, ..McConfig::default() },
            finetune: TrainConfig { epochs, learning_rate: 0.1, l2_lambda: 0.0, ..TrainConfig::default() },
            replay: 5,
            menu_size: 2,
            seed: 3,
        }
    }

    #[test]
    fn single_candidate_is_returned() {
        let m = fixed_scores(&[0.1, 0.5, -0.3, 0.0]);
        let universe: Vec<_> = (0..4).map(ItemId).collect();
        let ctx = QueryContext { user: UserId(0), universe: &universe, history: &[] };
        let q = utility_gain_query(&m, &ctx, &[pair(1, 3)], &AdmissionsUtility { k: 2 }, &small_cfg(3)).unwrap();
        assert_eq!(q, pair(1, 3));
        assert!(matches!(utility_gain_query(&m, &ctx, &[], &AdmissionsUtility { k: 2 }, &small_cfg(3)), Err(SamplerError::EmptyPool)));
    }

    #[test]
    fn no_retraining_means_no_gain() {
        let m = fixed_scores(&[0.1, 0.5, -0.3, 0.0, 0.8]);
        let universe: Vec<_> = (0..5).map(ItemId).collect();
        let ctx = QueryContext { user: UserId(0), universe: &universe, history: &[] };
        let pool = [pair(2, 4), pair(0, 1), pair(1, 3)];
        let cfg = SamplerConfig { finetune: TrainConfig { epochs: 0, ..TrainConfig::default() }, ..small_cfg(0) };
        let scored = score_candidates(&m, &ctx, &pool, &AdmissionsUtility { k: 2 }, &cfg).unwrap();
        assert!(scored.iter().all(|c| c.gains == [0.0, 0.0] && c.score == 0.0));
        assert_eq!(utility_gain_query(&m, &ctx, &pool, &AdmissionsUtility { k: 2 }, &cfg).unwrap(), pair(0, 1));
    }

    #[test]
    fn selection_ignores_pool_order() {
        let m = fixed_scores(&[0.1, 0.5, -0.3, 0.0, 0.8, 0.45]);
        let universe: Vec<_> = (0..6).map(ItemId).collect();
        let ctx = QueryContext { user: UserId(0), universe: &universe, history: &[] };
        let mut pool = vec![pair(0, 1), pair(1, 5), pair(2, 3), pair(4, 5), pair(0, 4)];
        let u = AdmissionsUtility { k: 2 };
        let a = utility_gain_query(&m, &ctx, &pool, &u, &small_cfg(3)).unwrap();
        pool.reverse();
        let b = utility_gain_query(&m, &ctx, &pool, &u, &small_cfg(3)).unwrap();
        assert_eq!(a, b);
        assert!(pool.contains(&a));
    }

    #[test]
    fn query_pool_draws_and_removes() {
        let mut pool = QueryPool::new(UserId(0), (0..6).map(ItemId).collect());
        assert_eq!(pool.remaining(), 15);
        assert!(pool.mark_asked(&pair(1, 2)));
        assert!(!pool.mark_asked(&pair(1, 2)));
        assert!(!pool.mark_asked(&pair(1, 9)));
        assert_eq!(pool.remaining(), 14);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let drawn = pool.draw(5, &mut rng);
        assert_eq!(drawn.len(), 5);
        assert!(drawn.iter().all(|p| !pool.was_asked(p)));
        assert!(drawn.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pool.draw(100, &mut rng).len(), 14);
    }

    #[test]
    fn cluster_queries_cross_two_clouds() {
        let mut data = Vec::new();
        for k in 0..10 {
            let off = if k < 5 { 0.0 } else { 10.0 };
            data.extend_from_slice(&[off + 0.01 * k as f64, off - 0.02 * k as f64]);
        }
        let f = CandidateFeatures::new(10, 2, data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = cluster_queries(UserId(0), &f, 1, 2, &mut rng).unwrap();
        assert_eq!(q.len(), 1);
        assert!(q[0].i.0 < 5 && q[0].j.0 >= 5);
        assert!(cluster_queries(UserId(0), &f, 0, 2, &mut rng).unwrap().is_empty());
        let a = cluster_queries(UserId(0), &f, 30, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = cluster_queries(UserId(0), &f, 30, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 30);
    }

    #[test]
    fn degenerate_features_fall_back_to_random_pairs() {
        let f = CandidateFeatures::new(6, 2, vec![0.5; 12]).unwrap();
        let q = cluster_queries(UserId(0), &f, 4, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.iter().collect::<HashSet<_>>().len(), 4);
    }
}
