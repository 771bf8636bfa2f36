//! Menu utilities and their expectation under the Plackett-Luce model.
//!
//! A utility `U(m, pi)` scores a menu `m` against a ranking `pi`. The quantity
//! optimised is the expectation over rankings drawn from the current scores,
//! estimated from sampled top-k prefixes or, for small universes, computed
//! exactly by enumerating permutations.
//!
//! Both built-in utilities aggregate a per-item value that depends only on
//! the item's position (sum for [`AdmissionsUtility`], max for
//! [`MediaUtility`]). Utilities exposing that structure get an incremental
//! greedy optimiser; any other [`UtilityFunction`] falls back to evaluating
//! whole menus.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plackett::{for_each_permutation, ranking_probability_unchecked, PlackettError, ScoreVector, TopKSampler};
use crate::prefcore::{ItemId, Menu, PartialRanking, PrefError};

/// Largest universe for which permutations are enumerated.
pub const MAX_EXACT_ITEMS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("menu is empty")]
    EmptyMenu,
    #[error("ranking depth {depth} is below the utility's cutoff {required}")]
    InsufficientDepth { depth: usize, required: usize },
    #[error("{item} lies outside the universe of {n} items")]
    OutsideUniverse { item: ItemId, n: usize },
    #[error("exact expectation enumerates n! rankings; n = {0} exceeds {MAX_EXACT_ITEMS}, use the Monte Carlo estimator")]
    TooLargeForExact(usize),
    #[error("menu size {size} is invalid for {n} items")]
    MenuSize { size: usize, n: usize },
    #[error("invalid Monte Carlo config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plackett(#[from] PlackettError),
    #[error(transparent)]
    Pref(#[from] PrefError),
}

/// How a utility combines per-item values over a menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Max,
}

impl Aggregation {
    #[inline]
    fn identity(self) -> f64 {
        match self {
            Aggregation::Sum => 0.0,
            Aggregation::Max => f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn combine(self, acc: f64, value: f64) -> f64 {
        match self {
            Aggregation::Sum => acc + value,
            Aggregation::Max => acc.max(value),
        }
    }
}

pub trait UtilityFunction: Send + Sync {
    fn name(&self) -> &str;

    /// Ranking depth that must be sampled for a universe of `n` items.
    fn depth(&self, n: usize) -> usize;

    /// Smallest depth at which [`evaluate`](Self::evaluate) is defined.
    fn min_depth(&self, n: usize) -> usize {
        let _ = n;
        1
    }

    fn evaluate(&self, menu: &Menu, ranking: &PartialRanking) -> Result<f64, UtilityError>;

    /// `Some` when `U(m, pi)` aggregates [`item_value`](Self::item_value) over the menu.
    fn aggregation(&self) -> Option<Aggregation> {
        None
    }

    /// Value of an item at 1-based `position` (`None`: below the sampled depth).
    fn item_value(&self, position: Option<usize>, n: usize) -> f64 {
        let _ = (position, n);
        0.0
    }
}

/// Rewards the best-placed menu item: `max_{j in m} (n + 1 - position(j))`.
///
/// Items missing from a truncated ranking count as last (value 1), so with
/// `depth < n` the estimate is a lower bound on the full-ranking utility.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaUtility {
    /// Sampled depth; `None` samples complete rankings.
    pub depth: Option<usize>,
}

/// Counts how many of the ranking's top `k` items the menu contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionsUtility {
    pub k: usize,
}

/// `max_{j in m} (n + 1 - position(j; pi))`, unranked items valued 1.
pub fn media_utility(menu: &Menu, ranking: &PartialRanking, n: usize) -> Result<f64, UtilityError> {
    if menu.is_empty() {
        return Err(UtilityError::EmptyMenu);
    }
    let mut best = 0usize;
    for &item in menu.items() {
        if item.0 >= n {
            return Err(UtilityError::OutsideUniverse { item, n });
        }
        let value = ranking.position_of(item).map_or(1, |p| n + 1 - p);
        best = best.max(value);
    }
    Ok(best as f64)
}

/// `|m ∩ top_k(pi)|`.
pub fn admissions_utility(menu: &Menu, ranking: &PartialRanking, k: usize) -> Result<usize, UtilityError> {
    let required = k.min(ranking.universe_size());
    if ranking.depth() < required {
        return Err(UtilityError::InsufficientDepth { depth: ranking.depth(), required });
    }
    Ok(ranking.ordered()[..required].iter().filter(|&&i| menu.contains(i)).count())
}

impl UtilityFunction for MediaUtility {
    fn name(&self) -> &str {
        "media"
    }

    fn depth(&self, n: usize) -> usize {
        self.depth.unwrap_or(n).clamp(1, n)
    }

    fn evaluate(&self, menu: &Menu, ranking: &PartialRanking) -> Result<f64, UtilityError> {
        media_utility(menu, ranking, ranking.universe_size())
    }

    fn aggregation(&self) -> Option<Aggregation> {
        Some(Aggregation::Max)
    }

    fn item_value(&self, position: Option<usize>, n: usize) -> f64 {
        position.map_or(1.0, |p| (n + 1 - p) as f64)
    }
}

impl UtilityFunction for AdmissionsUtility {
    fn name(&self) -> &str {
        "admissions"
    }

    fn depth(&self, n: usize) -> usize {
        self.k.clamp(1, n)
    }

    fn min_depth(&self, n: usize) -> usize {
        self.k.min(n)
    }

    fn evaluate(&self, menu: &Menu, ranking: &PartialRanking) -> Result<f64, UtilityError> {
        admissions_utility(menu, ranking, self.k).map(|c| c as f64)
    }

    fn aggregation(&self) -> Option<Aggregation> {
        Some(Aggregation::Sum)
    }

    fn item_value(&self, position: Option<usize>, _n: usize) -> f64 {
        match position {
            Some(p) if p <= self.k => 1.0,
            _ => 0.0,
        }
    }
}

/// Monte Carlo settings for expected-utility estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    /// Number of sampled rankings `R`.
    pub samples: usize,
    /// Sampled depth; `None` uses the utility's own depth.
    pub depth: Option<usize>,
    pub seed: u64,
    /// Universes of at most this many items are enumerated exactly instead of
    /// sampled (capped at [`MAX_EXACT_ITEMS`]). 0 disables exact evaluation.
    pub exact_up_to: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 500, depth: None, seed: 0, exact_up_to: 0 }
    }
}

impl McConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        if self.samples == 0 {
            return Err(UtilityError::InvalidConfig("samples must be at least 1".into()));
        }
        if self.depth == Some(0) {
            return Err(UtilityError::InvalidConfig("depth must be at least 1".into()));
        }
        Ok(())
    }

    fn depth_for(&self, utility: &dyn UtilityFunction, n: usize) -> Result<usize, UtilityError> {
        let depth = self.depth.unwrap_or_else(|| utility.depth(n)).min(n);
        let required = utility.min_depth(n);
        if depth < required {
            return Err(UtilityError::InsufficientDepth { depth, required });
        }
        Ok(depth)
    }

    fn is_exact_for(&self, n: usize) -> bool {
        n <= self.exact_up_to.min(MAX_EXACT_ITEMS)
    }
}

/// A fixed collection of (possibly weighted) ranking prefixes.
///
/// Evaluating many menus against one set gives common random numbers: the
/// difference between two menus' estimates carries no sampling noise from
/// separate draws.
#[derive(Debug, Clone)]
pub struct RankingSample {
    n: usize,
    depth: usize,
    rankings: Vec<Vec<ItemId>>,
    /// `positions[r * n + i]`: 1-based position of item `i` in ranking `r`, 0 if absent.
    positions: Vec<u32>,
    /// Probability weights summing to one; `None` means uniform.
    weights: Option<Vec<f64>>,
}

impl RankingSample {
    /// Draws `samples` prefixes of length `depth`.
    pub fn draw(scores: &ScoreVector, depth: usize, samples: usize, seed: u64) -> Result<Self, UtilityError> {
        let n = scores.len();
        if depth == 0 || depth > n {
            return Err(PlackettError::DepthOutOfRange { k: depth, n }.into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampler = TopKSampler::new(n);
        let mut rankings = Vec::with_capacity(samples);
        let mut buf = Vec::with_capacity(depth);
        for _ in 0..samples {
            sampler.sample_into(scores.weights(), depth, &mut rng, &mut buf);
            rankings.push(buf.clone());
        }
        Ok(Self::from_rankings(n, depth, rankings, None))
    }

    /// Every permutation, weighted by its probability.
    pub fn enumerate(scores: &ScoreVector) -> Result<Self, UtilityError> {
        let n = scores.len();
        if n > MAX_EXACT_ITEMS {
            return Err(UtilityError::TooLargeForExact(n));
        }
        let mut rankings = Vec::new();
        let mut weights = Vec::new();
        for_each_permutation(n, |p| {
            weights.push(ranking_probability_unchecked(scores.weights(), p));
            rankings.push(p.to_vec());
        });
        Ok(Self::from_rankings(n, n, rankings, Some(weights)))
    }

    /// Every ordered prefix of length `depth`, weighted by its probability.
    pub fn enumerate_prefixes(scores: &ScoreVector, depth: usize) -> Result<Self, UtilityError> {
        let n = scores.len();
        if n > MAX_EXACT_ITEMS {
            return Err(UtilityError::TooLargeForExact(n));
        }
        if depth == 0 || depth > n {
            return Err(PlackettError::DepthOutOfRange { k: depth, n }.into());
        }
        fn extend(theta: &[f64], depth: usize, prefix: &mut Vec<ItemId>, used: &mut [bool], mass: f64, prob: f64, out: &mut (Vec<Vec<ItemId>>, Vec<f64>)) {
            if prefix.len() == depth {
                out.0.push(prefix.clone());
                out.1.push(prob);
                return;
            }
            for i in 0..theta.len() {
                if used[i] {
                    continue;
                }
                used[i] = true;
                prefix.push(ItemId(i));
                extend(theta, depth, prefix, used, mass - theta[i], prob * theta[i] / mass, out);
                prefix.pop();
                used[i] = false;
            }
        }
        let theta = scores.weights();
        let mut out = (Vec::new(), Vec::new());
        extend(theta, depth, &mut Vec::with_capacity(depth), &mut vec![false; n], theta.iter().sum(), 1.0, &mut out);
        Ok(Self::from_rankings(n, depth, out.0, Some(out.1)))
    }

    /// Exact enumeration when `cfg` allows it for this universe, sampling otherwise.
    pub fn for_config(scores: &ScoreVector, utility: &dyn UtilityFunction, cfg: &McConfig) -> Result<Self, UtilityError> {
        cfg.validate()?;
        if cfg.is_exact_for(scores.len()) {
            return Self::enumerate(scores);
        }
        let depth = cfg.depth_for(utility, scores.len())?;
        Self::draw(scores, depth, cfg.samples, cfg.seed)
    }

    fn from_rankings(n: usize, depth: usize, rankings: Vec<Vec<ItemId>>, weights: Option<Vec<f64>>) -> Self {
        let mut positions = vec![0u32; rankings.len() * n];
        for (r, ranking) in rankings.iter().enumerate() {
            for (p, item) in ranking.iter().enumerate() {
                positions[r * n + item.0] = (p + 1) as u32;
            }
        }
        Self { n, depth, rankings, positions, weights }
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    pub fn universe_size(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn rankings(&self) -> impl Iterator<Item = PartialRanking> + '_ {
        self.rankings.iter().map(|r| PartialRanking::from_parts_unchecked(r.clone(), self.n))
    }

    /// Unnormalised weight of ranking `r`; see [`normalizer`](Self::normalizer).
    #[inline]
    fn weight(&self, r: usize) -> f64 {
        match &self.weights {
            Some(w) => w[r],
            None => 1.0,
        }
    }

    /// Divisor turning weighted sums into expectations. Uniform sets sum
    /// first and divide once, so equal values average to exactly that value.
    #[inline]
    fn normalizer(&self) -> f64 {
        match &self.weights {
            Some(_) => 1.0,
            None => self.rankings.len() as f64,
        }
    }

    #[inline]
    fn position(&self, r: usize, item: usize) -> Option<usize> {
        match self.positions[r * self.n + item] {
            0 => None,
            p => Some(p as usize),
        }
    }

    fn check_menu(&self, menu: &Menu) -> Result<(), UtilityError> {
        if let Some(&item) = menu.items().iter().find(|i| i.0 >= self.n) {
            return Err(UtilityError::OutsideUniverse { item, n: self.n });
        }
        Ok(())
    }

    /// Weighted mean of `U(menu, pi)` over the set.
    pub fn expected_utility(&self, menu: &Menu, utility: &dyn UtilityFunction) -> Result<f64, UtilityError> {
        self.check_menu(menu)?;
        if self.depth < utility.min_depth(self.n) {
            return Err(UtilityError::InsufficientDepth { depth: self.depth, required: utility.min_depth(self.n) });
        }
        match utility.aggregation() {
            Some(agg) => {
                if menu.is_empty() && agg == Aggregation::Max {
                    return Err(UtilityError::EmptyMenu);
                }
                let mut total = 0.0;
                for r in 0..self.len() {
                    let value = menu
                        .items()
                        .iter()
                        .fold(agg.identity(), |acc, i| agg.combine(acc, utility.item_value(self.position(r, i.0), self.n)));
                    total += self.weight(r) * value;
                }
                Ok(total / self.normalizer())
            }
            None => {
                let mut total = 0.0;
                for (r, ranking) in self.rankings().enumerate() {
                    total += self.weight(r) * utility.evaluate(menu, &ranking)?;
                }
                Ok(total / self.normalizer())
            }
        }
    }

    /// Greedy menu of `size` items maximising the set's expected utility.
    ///
    /// Each step adds the item with the largest estimated value of
    /// `menu + item`; exact ties go to the smallest id. Returns the menu and its
    /// estimated expected utility.
    pub fn greedy_menu(&self, utility: &dyn UtilityFunction, size: usize) -> Result<(Menu, f64), UtilityError> {
        if size == 0 || size > self.n {
            return Err(UtilityError::MenuSize { size, n: self.n });
        }
        if self.depth < utility.min_depth(self.n) {
            return Err(UtilityError::InsufficientDepth { depth: self.depth, required: utility.min_depth(self.n) });
        }
        match utility.aggregation() {
            Some(agg) => Ok(self.greedy_itemwise(utility, agg, size)),
            None => greedy_maximize(self.n, size, |menu| self.expected_utility(menu, utility)),
        }
    }

    fn greedy_itemwise(&self, utility: &dyn UtilityFunction, agg: Aggregation, size: usize) -> (Menu, f64) {
        let n = self.n;
        let samples = self.len();
        let weights: Vec<f64> = (0..samples).map(|r| self.weight(r)).collect();
        let values: Vec<f64> = (0..samples * n).map(|idx| utility.item_value(self.position(idx / n, idx % n), n)).collect();
        let mut current = vec![agg.identity(); samples];
        let mut chosen = vec![false; n];
        let mut menu = Menu::new(size).expect("size checked");
        let mut best_total = 0.0;
        for _ in 0..size {
            let mut best: Option<(usize, f64)> = None;
            for item in 0..n {
                if chosen[item] {
                    continue;
                }
                let mut total = 0.0;
                for r in 0..samples {
                    total += weights[r] * agg.combine(current[r], values[r * n + item]);
                }
                if best.is_none_or(|(_, b)| beats(total, b)) {
                    best = Some((item, total));
                }
            }
            let (item, total) = best.expect("size <= n leaves a candidate");
            chosen[item] = true;
            menu.insert(ItemId(item)).expect("menu has room");
            for r in 0..samples {
                current[r] = agg.combine(current[r], values[r * n + item]);
            }
            best_total = total;
        }
        (menu, best_total / self.normalizer())
    }
}

/// Strict improvement beyond floating-point summation noise, so that values
/// equal in exact arithmetic fall to the smallest-id tie-break.
#[inline]
fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-12 * incumbent.abs().max(1.0)
}

/// Generic greedy maximisation of a set function over menus drawn from `0..n`.
///
/// Ties go to the smallest item id.
pub fn greedy_maximize<F>(n: usize, size: usize, mut objective: F) -> Result<(Menu, f64), UtilityError>
where
    F: FnMut(&Menu) -> Result<f64, UtilityError>,
{
    if size == 0 || size > n {
        return Err(UtilityError::MenuSize { size, n });
    }
    let mut menu = Menu::new(size)?;
    let mut value = 0.0;
    for _ in 0..size {
        let mut best: Option<(ItemId, f64)> = None;
        for item in (0..n).map(ItemId).filter(|i| !menu.contains(*i)) {
            let mut candidate = menu.clone();
            candidate.insert(item)?;
            let v = objective(&candidate)?;
            if best.is_none_or(|(_, b)| beats(v, b)) {
                best = Some((item, v));
            }
        }
        let (item, v) = best.expect("size <= n leaves a candidate");
        menu.insert(item)?;
        value = v;
    }
    Ok((menu, value))
}

/// Monte Carlo estimate of `E_pi[U(menu, pi)]` from `cfg.samples` sampled prefixes.
pub fn expected_utility_mc(menu: &Menu, scores: &ScoreVector, utility: &dyn UtilityFunction, cfg: &McConfig) -> Result<f64, UtilityError> {
    cfg.validate()?;
    let depth = cfg.depth_for(utility, scores.len())?;
    RankingSample::draw(scores, depth, cfg.samples, cfg.seed)?.expected_utility(menu, utility)
}

/// `sum_pi P(pi | theta) U(menu, pi)` over all `n!` complete rankings.
///
/// Evaluates the utility on every full permutation through
/// [`UtilityFunction::evaluate`], independently of the sampling machinery.
pub fn exact_expected_utility(menu: &Menu, scores: &ScoreVector, utility: &dyn UtilityFunction) -> Result<f64, UtilityError> {
    let n = scores.len();
    if n > MAX_EXACT_ITEMS {
        return Err(UtilityError::TooLargeForExact(n));
    }
    if let Some(&item) = menu.items().iter().find(|i| i.0 >= n) {
        return Err(UtilityError::OutsideUniverse { item, n });
    }
    let mut total = 0.0;
    let mut failure = None;
    let mut ranking = PartialRanking::from_parts_unchecked(Vec::with_capacity(n), n);
    for_each_permutation(n, |p| {
        if failure.is_some() {
            return;
        }
        ranking.set_unchecked(p);
        match utility.evaluate(menu, &ranking) {
            Ok(u) => total += ranking_probability_unchecked(scores.weights(), p) * u,
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// The recommended menu: greedy maximisation of expected utility, with all
/// candidates of a step scored against the same ranking sample.
pub fn best_menu(scores: &ScoreVector, utility: &dyn UtilityFunction, menu_size: usize, cfg: &McConfig) -> Result<Menu, UtilityError> {
    best_menu_with_value(scores, utility, menu_size, cfg).map(|(m, _)| m)
}

/// [`best_menu`] together with its estimated expected utility.
pub fn best_menu_with_value(scores: &ScoreVector, utility: &dyn UtilityFunction, menu_size: usize, cfg: &McConfig) -> Result<(Menu, f64), UtilityError> {
    if menu_size == 0 || menu_size > scores.len() {
        return Err(UtilityError::MenuSize { size: menu_size, n: scores.len() });
    }
    RankingSample::for_config(scores, utility, cfg)?.greedy_menu(utility, menu_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<ItemId> {
        v.iter().copied().map(ItemId).collect()
    }

    fn menu(v: &[usize]) -> Menu {
        Menu::from_items(ids(v), v.len().max(1)).unwrap()
    }

    fn full(order: &[usize]) -> PartialRanking {
        PartialRanking::new(ids(order), order.len()).unwrap()
    }

    #[test]
    fn media_examples() {
        let pi = full(&[3, 1, 4, 0, 2]);
        assert_eq!(media_utility(&menu(&[3, 2]), &pi, 5).unwrap(), 5.0);
        // positions 2 and 4
        assert_eq!(media_utility(&menu(&[1, 0]), &pi, 5).unwrap(), 4.0);
        assert_eq!(media_utility(&menu(&[2]), &pi, 5).unwrap(), 1.0);
        assert_eq!(media_utility(&Menu::new(2).unwrap(), &pi, 5), Err(UtilityError::EmptyMenu));
    }

    #[test]
    fn media_truncated_counts_missing_items_as_last() {
        let pi = PartialRanking::new(ids(&[3, 1]), 5).unwrap();
        assert_eq!(media_utility(&menu(&[0, 2]), &pi, 5).unwrap(), 1.0);
        assert_eq!(media_utility(&menu(&[0, 1]), &pi, 5).unwrap(), 4.0);
    }

    #[test]
    fn admissions_examples() {
        let pi = full(&[4, 2, 0, 1, 3]);
        assert_eq!(admissions_utility(&menu(&[0, 2, 4, 1]), &pi, 3).unwrap(), 3);
        assert_eq!(admissions_utility(&menu(&[1, 3]), &pi, 3).unwrap(), 0);
        assert_eq!(admissions_utility(&menu(&[2, 0, 3]), &pi, 3).unwrap(), 2);
        let short = PartialRanking::new(ids(&[4, 2]), 5).unwrap();
        assert!(matches!(admissions_utility(&menu(&[0]), &short, 3), Err(UtilityError::InsufficientDepth { .. })));
    }

    #[test]
    fn exact_expectation_examples() {
        let uniform = ScoreVector::uniform(5).unwrap();
        let k1 = AdmissionsUtility { k: 1 };
        let v = exact_expected_utility(&menu(&[0, 3]), &uniform, &k1).unwrap();
        assert!((v - 2.0 / 5.0).abs() < 1e-12);
        let skewed = ScoreVector::from_weights(vec![2.0, 1.0, 1.0]).unwrap();
        let v = exact_expected_utility(&menu(&[0]), &skewed, &k1).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let k2 = AdmissionsUtility { k: 2 };
        let v = exact_expected_utility(&menu(&[0, 1, 2]), &skewed, &k2).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let big = ScoreVector::uniform(9).unwrap();
        assert_eq!(exact_expected_utility(&menu(&[0]), &big, &k1), Err(UtilityError::TooLargeForExact(9)));
    }

    #[test]
    fn mc_full_menu_is_exactly_k() {
        let scores = ScoreVector::from_log_scores(&[0.3, -1.0, 2.0, 0.0, 0.5, 1.1]).unwrap();
        let u = AdmissionsUtility { k: 3 };
        let cfg = McConfig { samples: 200, seed: 3, ..McConfig::default() };
        assert_eq!(expected_utility_mc(&menu(&[0, 1, 2, 3, 4, 5]), &scores, &u, &cfg).unwrap(), 3.0);
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let scores = ScoreVector::from_log_scores(&[0.3, -1.0, 2.0, 0.0]).unwrap();
        let u = MediaUtility::default();
        let cfg = McConfig { samples: 300, seed: 17, ..McConfig::default() };
        let a = expected_utility_mc(&menu(&[1, 3]), &scores, &u, &cfg).unwrap();
        let b = expected_utility_mc(&menu(&[1, 3]), &scores, &u, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(expected_utility_mc(&menu(&[1]), &scores, &u, &McConfig { samples: 0, ..cfg }).is_err());
    }

    #[test]
    fn mc_matches_exact_on_a_small_universe() {
        let scores = ScoreVector::from_weights(vec![1.7, 0.4, 2.9, 1.0]).unwrap();
        let u = AdmissionsUtility { k: 2 };
        let m = menu(&[0, 3]);
        let exact = exact_expected_utility(&m, &scores, &u).unwrap();
        let est = expected_utility_mc(&m, &scores, &u, &McConfig { samples: 10_000, seed: 5, ..McConfig::default() }).unwrap();
        assert!((est - exact).abs() < 0.02, "est {est} exact {exact}");
    }

    #[test]
    fn enumerated_sample_agrees_with_exact_route() {
        let scores = ScoreVector::from_weights(vec![0.2, 1.5, 0.9, 3.0, 0.6]).unwrap();
        let set = RankingSample::enumerate(&scores).unwrap();
        let media = MediaUtility::default();
        let adm = AdmissionsUtility { k: 2 };
        for m in [menu(&[0]), menu(&[1, 4]), menu(&[2, 3, 0])] {
            for u in [&media as &dyn UtilityFunction, &adm] {
                let a = set.expected_utility(&m, u).unwrap();
                let b = exact_expected_utility(&m, &scores, u).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_scores_pick_smallest_ids_under_exact_evaluation() {
        let scores = ScoreVector::uniform(6).unwrap();
        let cfg = McConfig { exact_up_to: MAX_EXACT_ITEMS, ..McConfig::default() };
        let m = best_menu(&scores, &AdmissionsUtility { k: 2 }, 3, &cfg).unwrap();
        assert_eq!(m.items(), ids(&[0, 1, 2]).as_slice());
    }

    #[test]
    fn strongly_ordered_scores_pick_the_top_items() {
        let n = 8;
        let theta: Vec<f64> = (0..n).map(|i| 2f64.powi((n - i) as i32)).collect();
        let scores = ScoreVector::from_weights(theta).unwrap();
        let cfg = McConfig { samples: 2000, seed: 1, ..McConfig::default() };
        for size in 1..=3 {
            let m = best_menu(&scores, &AdmissionsUtility { k: size }, size, &cfg).unwrap();
            assert_eq!(m.sorted_items(), ids(&(0..size).collect::<Vec<_>>()));
        }
        let m = best_menu(&scores, &AdmissionsUtility { k: 3 }, n, &cfg).unwrap();
        assert_eq!(m.sorted_items(), ids(&(0..n).collect::<Vec<_>>()));
        assert!(best_menu(&scores, &AdmissionsUtility { k: 3 }, n + 1, &cfg).is_err());
    }

    #[test]
    fn itemwise_greedy_matches_generic_greedy_on_the_same_sample() {
        let scores = ScoreVector::from_log_scores(&[0.1, 0.9, -0.4, 1.3, 0.0, 0.7, -1.0]).unwrap();
        let set = RankingSample::draw(&scores, 7, 400, 9).unwrap();
        for u in [&MediaUtility::default() as &dyn UtilityFunction, &AdmissionsUtility { k: 3 }] {
            let (fast, fv) = set.greedy_menu(u, 3).unwrap();
            let (slow, sv) = greedy_maximize(7, 3, |m| set.expected_utility(m, u)).unwrap();
            assert_eq!(fast, slow);
            assert!((fv - sv).abs() < 1e-9);
        }
    }

    #[test]
    fn admissions_prefix_sampling_is_lossless() {
        let scores = ScoreVector::from_weights(vec![0.5, 2.0, 1.2, 0.3, 1.0]).unwrap();
        let full = RankingSample::enumerate(&scores).unwrap();
        for k in 1..=4 {
            let u = AdmissionsUtility { k };
            let prefixes = RankingSample::enumerate_prefixes(&scores, k).unwrap();
            for m in [menu(&[0]), menu(&[1, 3]), menu(&[2, 4, 0])] {
                let a = prefixes.expected_utility(&m, &u).unwrap();
                let b = full.expected_utility(&m, &u).unwrap();
                assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn adding_items_never_hurts() {
        let pi = full(&[2, 0, 4, 1, 3]);
        let mut m = Menu::new(5).unwrap();
        let mut last_media = 0.0;
        let mut last_adm = 0;
        for item in [3, 1, 0, 2, 4] {
            m.insert(ItemId(item)).unwrap();
            let media = media_utility(&m, &pi, 5).unwrap();
            let adm = admissions_utility(&m, &pi, 2).unwrap();
            assert!(media >= last_media && adm >= last_adm);
            last_media = media;
            last_adm = adm;
        }
    }
}
