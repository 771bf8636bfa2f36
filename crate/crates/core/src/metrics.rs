//! Ranking-quality metrics.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::prefcore::{GroundTruthRanking, ItemId, Menu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("rankings cover different item sets")]
    ItemSetMismatch,
    #[error("{0} appears more than once")]
    DuplicateItem(ItemId),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("list has {len} items, fewer than k = {k}")]
    ShortList { len: usize, k: usize },
    #[error("relevance has no positive gain; NDCG is undefined")]
    NoRelevantItems,
    #[error("negative or non-finite gain for {0}")]
    InvalidGain(ItemId),
    #[error("{0} is not ranked in the ground truth")]
    Unranked(ItemId),
    #[error("menu is empty")]
    EmptyMenu,
    #[error("need at least two ranked items, got {0}")]
    TooFewItems(usize),
}

/// Items with a sort key each; smaller keys rank higher, equal keys are tied.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    entries: Vec<(ItemId, f64)>,
}

impl RankedList {
    /// A strict order: the item at index `p` gets key `p`.
    pub fn from_order(items: &[ItemId]) -> Result<Self, MetricError> {
        Self::from_keys(items.iter().enumerate().map(|(p, &i)| (i, p as f64)).collect())
    }

    /// Explicit sort keys; equal keys encode ties.
    pub fn from_keys(entries: Vec<(ItemId, f64)>) -> Result<Self, MetricError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(item, _) in &entries {
            if !seen.insert(item) {
                return Err(MetricError::DuplicateItem(item));
            }
        }
        Ok(Self { entries })
    }

    /// Items ordered by descending score (higher score ranks higher).
    pub fn from_scores(items: &[ItemId], scores: &[f64]) -> Result<Self, MetricError> {
        Self::from_keys(items.iter().zip(scores).map(|(&i, &s)| (i, -s)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(ItemId, f64)] {
        &self.entries
    }

    fn key_map(&self) -> HashMap<ItemId, f64> {
        self.entries.iter().copied().collect()
    }
}

/// Pair counts underlying Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in `a` only.
    pub tied_a: u64,
    /// Tied in `b` only.
    pub tied_b: u64,
    /// Tied in both.
    pub tied_both: u64,
}

impl PairCounts {
    pub fn tau_b(&self) -> f64 {
        let p = self.concordant as f64;
        let q = self.discordant as f64;
        let denom = ((p + q + self.tied_a as f64) * (p + q + self.tied_b as f64)).sqrt();
        if denom == 0.0 {
            // one list ties everything: no ordinal information
            0.0
        } else {
            (p - q) / denom
        }
    }
}

/// Aligned key pairs `(key_a, key_b)` for the common item set.
fn aligned_keys(a: &RankedList, b: &RankedList) -> Result<Vec<(f64, f64)>, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::ItemSetMismatch);
    }
    let kb = b.key_map();
    a.entries
        .iter()
        .map(|(item, ka)| kb.get(item).map(|&x| (*ka, x)).ok_or(MetricError::ItemSetMismatch))
        .collect()
}

/// Counts pairs in O(n log n): sort by `(a, b)`, count ties, then count
/// inversions of the `b` sequence with a merge sort.
pub fn pair_counts(a: &RankedList, b: &RankedList) -> Result<PairCounts, MetricError> {
    let mut keys = aligned_keys(a, b)?;
    let n = keys.len() as u64;
    let total = n * n.saturating_sub(1) / 2;
    keys.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let runs = |eq: &dyn Fn(usize, usize) -> bool| -> u64 {
        let mut sum = 0u64;
        let mut start = 0;
        for i in 1..=keys.len() {
            if i == keys.len() || !eq(start, i) {
                let len = (i - start) as u64;
                sum += len * (len - 1) / 2;
                start = i;
            }
        }
        sum
    };
    let tied_a_any = runs(&|s, i| keys[s].0 == keys[i].0);
    let tied_both = runs(&|s, i| keys[s].0 == keys[i].0 && keys[s].1 == keys[i].1);

    let mut seq: Vec<f64> = keys.iter().map(|k| k.1).collect();
    let mut buf = vec![0.0; seq.len()];
    let swaps = merge_count(&mut seq, &mut buf);

    // `seq` is now sorted by b; count its tie runs
    let mut tied_b_any = 0u64;
    let mut start = 0;
    for i in 1..=seq.len() {
        if i == seq.len() || seq[start] != seq[i] {
            let len = (i - start) as u64;
            tied_b_any += len * (len - 1) / 2;
            start = i;
        }
    }

    let tied_a = tied_a_any - tied_both;
    let tied_b = tied_b_any - tied_both;
    let discordant = swaps;
    let concordant = total - tied_a - tied_b - tied_both - discordant;
    Ok(PairCounts { concordant, discordant, tied_a, tied_b, tied_both })
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Kendall's tau-b, `(P - Q) / sqrt((P + Q + T)(P + Q + U))`.
///
/// Returns 0 when either list ties every pair.
pub fn kendall_tau(a: &RankedList, b: &RankedList) -> Result<f64, MetricError> {
    Ok(pair_counts(a, b)?.tau_b())
}

fn check_k(len: usize, k: usize) -> Result<(), MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if len < k {
        return Err(MetricError::ShortList { len, k });
    }
    Ok(())
}

/// `|top_k(recommended) ∩ relevant| / k`.
pub fn precision_at_k(recommended: &[ItemId], relevant: &HashSet<ItemId>, k: usize) -> Result<f64, MetricError> {
    check_k(recommended.len(), k)?;
    let hits = recommended[..k].iter().filter(|i| relevant.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

/// `DCG@k / IDCG@k` with discount `1 / log2(p + 1)`.
pub fn ndcg_at_k(recommended: &[ItemId], relevance: &HashMap<ItemId, f64>, k: usize) -> Result<f64, MetricError> {
    check_k(recommended.len(), k)?;
    for (&item, &g) in relevance {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(MetricError::InvalidGain(item));
        }
    }
    let discount = |p: usize| 1.0 / ((p + 2) as f64).log2();
    let dcg: f64 = recommended[..k].iter().enumerate().map(|(p, i)| relevance.get(i).copied().unwrap_or(0.0) * discount(p)).sum();
    let mut ideal: Vec<f64> = relevance.values().copied().filter(|&g| g > 0.0).collect();
    if ideal.is_empty() {
        return Err(MetricError::NoRelevantItems);
    }
    ideal.sort_by(|x, y| y.total_cmp(x));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(p, g)| g * discount(p)).sum();
    Ok(dcg / idcg)
}

/// `(n - best_position) / (n - 1)`, where `best_position` is the truth
/// position of the menu's highest-ranked item and `n` the truth length.
pub fn max_rank_percentile(menu: &Menu, truth: &GroundTruthRanking) -> Result<f64, MetricError> {
    if menu.is_empty() {
        return Err(MetricError::EmptyMenu);
    }
    let n = truth.len();
    if n < 2 {
        return Err(MetricError::TooFewItems(n));
    }
    let mut best = usize::MAX;
    for &item in menu.items() {
        best = best.min(truth.position_of(item).map_err(|_| MetricError::Unranked(item))?);
    }
    Ok((n - best) as f64 / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<ItemId> {
        v.iter().copied().map(ItemId).collect()
    }

    fn order(v: &[usize]) -> RankedList {
        RankedList::from_order(&ids(v)).unwrap()
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&order(&[0, 1, 2, 3]), &order(&[0, 1, 2, 3])).unwrap(), 1.0);
        assert_eq!(kendall_tau(&order(&[0, 1, 2, 3]), &order(&[3, 2, 1, 0])).unwrap(), -1.0);
        let t = kendall_tau(&order(&[0, 1, 2]), &order(&[1, 0, 2])).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(kendall_tau(&order(&[0, 1]), &order(&[0, 2])), Err(MetricError::ItemSetMismatch));
        assert_eq!(kendall_tau(&order(&[0, 1]), &order(&[0, 1, 2])), Err(MetricError::ItemSetMismatch));
    }

    #[test]
    fn tau_with_ties() {
        // a: 0 < 1 = 2 < 3, b strict 0 1 2 3
        let a = RankedList::from_keys(vec![(ItemId(0), 0.0), (ItemId(1), 1.0), (ItemId(2), 1.0), (ItemId(3), 2.0)]).unwrap();
        let c = pair_counts(&a, &order(&[0, 1, 2, 3])).unwrap();
        assert_eq!(c, PairCounts { concordant: 5, discordant: 0, tied_a: 1, tied_b: 0, tied_both: 0 });
        let t = c.tau_b();
        assert!((t - 5.0 / (5.0f64 * 6.0).sqrt()).abs() < 1e-12);
        let flat = RankedList::from_keys(ids(&[0, 1, 2]).into_iter().map(|i| (i, 0.0)).collect()).unwrap();
        assert_eq!(kendall_tau(&flat, &order(&[2, 0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn duplicates_rejected() {
        assert_eq!(RankedList::from_order(&ids(&[0, 1, 0])), Err(MetricError::DuplicateItem(ItemId(0))));
    }

    #[test]
    fn precision_examples() {
        let rec = ids(&(0..10).collect::<Vec<_>>());
        let all: HashSet<_> = rec.iter().copied().collect();
        assert_eq!(precision_at_k(&rec, &all, 10).unwrap(), 1.0);
        let none: HashSet<_> = ids(&[20, 21]).into_iter().collect();
        assert_eq!(precision_at_k(&rec, &none, 10).unwrap(), 0.0);
        let seven: HashSet<_> = ids(&[0, 2, 3, 5, 6, 8, 9, 15]).into_iter().collect();
        assert!((precision_at_k(&rec, &seven, 10).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(precision_at_k(&rec[..3], &all, 5), Err(MetricError::ShortList { .. })));
        assert_eq!(precision_at_k(&rec, &all, 0), Err(MetricError::ZeroK));
    }

    #[test]
    fn ndcg_examples() {
        let gains: HashMap<_, _> = [(ItemId(0), 3.0), (ItemId(1), 2.0), (ItemId(2), 1.0)].into_iter().collect();
        assert!((ndcg_at_k(&ids(&[0, 1, 2, 3]), &gains, 3).unwrap() - 1.0).abs() < 1e-12);
        let one: HashMap<_, _> = [(ItemId(5), 1.0)].into_iter().collect();
        let v = ndcg_at_k(&ids(&[4, 5]), &one, 2).unwrap();
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&ids(&[1, 2]), &one, 2).unwrap(), 0.0);
        let zero: HashMap<_, _> = [(ItemId(1), 0.0)].into_iter().collect();
        assert_eq!(ndcg_at_k(&ids(&[1, 2]), &zero, 2), Err(MetricError::NoRelevantItems));
    }

    #[test]
    fn max_rank_examples() {
        let truth = GroundTruthRanking::from_order(ids(&(0..10).collect::<Vec<_>>())).unwrap();
        let m = Menu::from_items(ids(&[4, 0]), 2).unwrap();
        assert_eq!(max_rank_percentile(&m, &truth).unwrap(), 1.0);
        let m = Menu::from_items(ids(&[9]), 1).unwrap();
        assert_eq!(max_rank_percentile(&m, &truth).unwrap(), 0.0);
        let truth = GroundTruthRanking::from_order(ids(&(0..11).collect::<Vec<_>>())).unwrap();
        let m = Menu::from_items(ids(&[2, 7]), 2).unwrap();
        assert!((max_rank_percentile(&m, &truth).unwrap() - 0.8).abs() < 1e-12);
        let m = Menu::from_items(ids(&[40]), 1).unwrap();
        assert_eq!(max_rank_percentile(&m, &truth), Err(MetricError::Unranked(ItemId(40))));
    }
}
