//! Shared domain types: dense identifiers, comparisons, menus and rankings.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense 0-based item index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub usize);

/// Dense 0-based user index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub usize);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item#{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrefError {
    #[error("{0} is not part of the ranking")]
    UnknownItem(ItemId),
    #[error("a comparison needs two distinct items, got {0} twice")]
    SelfComparison(ItemId),
    #[error("menu is full (capacity {0})")]
    MenuFull(usize),
    #[error("menu capacity must be positive")]
    ZeroCapacity,
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
}

/// Observed preference: `user` prefers `winner` over `loser`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonTriplet {
    pub user: UserId,
    pub winner: ItemId,
    pub loser: ItemId,
}

impl ComparisonTriplet {
    pub fn new(user: UserId, winner: ItemId, loser: ItemId) -> Result<Self, PrefError> {
        if winner == loser {
            return Err(PrefError::SelfComparison(winner));
        }
        Ok(Self { user, winner, loser })
    }
}

impl fmt::Display for ComparisonTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} > {}", self.user, self.winner, self.loser)
    }
}

/// A set of recommended items with a fixed capacity.
///
/// Items keep insertion order, which for greedy construction is the order in
/// which they were selected. Inserting an item that is already present is a
/// no-op.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Menu {
    items: Vec<ItemId>,
    capacity: usize,
}

impl Menu {
    pub fn new(capacity: usize) -> Result<Self, PrefError> {
        if capacity == 0 {
            return Err(PrefError::ZeroCapacity);
        }
        Ok(Self { items: Vec::with_capacity(capacity), capacity })
    }

    /// Builds a menu from `items`; duplicates are dropped.
    pub fn from_items(items: impl IntoIterator<Item = ItemId>, capacity: usize) -> Result<Self, PrefError> {
        let mut menu = Self::new(capacity)?;
        for item in items {
            menu.insert(item)?;
        }
        Ok(menu)
    }

    /// Returns `Ok(true)` if the item was added, `Ok(false)` if it was already present.
    pub fn insert(&mut self, item: ItemId) -> Result<bool, PrefError> {
        if self.contains(item) {
            return Ok(false);
        }
        if self.items.len() == self.capacity {
            return Err(PrefError::MenuFull(self.capacity));
        }
        self.items.push(item);
        Ok(true)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items in ascending id order.
    pub fn sorted_items(&self) -> Vec<ItemId> {
        let mut items = self.items.clone();
        items.sort_unstable();
        items
    }
}

/// The first `ordered.len()` positions of a ranking over `universe_size` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRanking {
    ordered: Vec<ItemId>,
    universe_size: usize,
}

impl PartialRanking {
    pub fn new(ordered: Vec<ItemId>, universe_size: usize) -> Result<Self, PrefError> {
        if ordered.len() > universe_size {
            return Err(PrefError::InvalidRanking(format!(
                "{} entries exceed universe of {universe_size}",
                ordered.len()
            )));
        }
        let mut seen = vec![false; universe_size];
        for item in &ordered {
            match seen.get_mut(item.0) {
                None => {
                    return Err(PrefError::InvalidRanking(format!("{item} outside universe of {universe_size}")))
                }
                Some(true) => return Err(PrefError::InvalidRanking(format!("{item} appears twice"))),
                Some(slot) => *slot = true,
            }
        }
        Ok(Self { ordered, universe_size })
    }

    /// Skips validation; callers guarantee distinct in-range entries.
    pub(crate) fn from_parts_unchecked(ordered: Vec<ItemId>, universe_size: usize) -> Self {
        Self { ordered, universe_size }
    }

    /// Overwrites the entries in place, reusing the allocation.
    pub(crate) fn set_unchecked(&mut self, ordered: &[ItemId]) {
        self.ordered.clear();
        self.ordered.extend_from_slice(ordered);
    }

    pub fn ordered(&self) -> &[ItemId] {
        &self.ordered
    }

    pub fn depth(&self) -> usize {
        self.ordered.len()
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn is_full(&self) -> bool {
        self.ordered.len() == self.universe_size
    }

    /// 1-based position of `item`, or `None` if it falls below the sampled depth.
    pub fn position_of(&self, item: ItemId) -> Option<usize> {
        self.ordered.iter().position(|&x| x == item).map(|p| p + 1)
    }
}

/// A complete ordering of a set of items; position 1 is the most preferred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ItemId>", into = "Vec<ItemId>")]
pub struct GroundTruthRanking {
    order: Vec<ItemId>,
    position: HashMap<ItemId, usize>,
}

impl TryFrom<Vec<ItemId>> for GroundTruthRanking {
    type Error = PrefError;

    fn try_from(order: Vec<ItemId>) -> Result<Self, Self::Error> {
        Self::from_order(order)
    }
}

impl From<GroundTruthRanking> for Vec<ItemId> {
    fn from(r: GroundTruthRanking) -> Self {
        r.order
    }
}

impl GroundTruthRanking {
    /// `order[0]` is the most preferred item.
    pub fn from_order(order: Vec<ItemId>) -> Result<Self, PrefError> {
        let mut position = HashMap::with_capacity(order.len());
        for (idx, &item) in order.iter().enumerate() {
            if position.insert(item, idx + 1).is_some() {
                return Err(PrefError::InvalidRanking(format!("{item} appears twice")));
            }
        }
        Ok(Self { order, position })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[ItemId] {
        &self.order
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.position.contains_key(&item)
    }

    /// 1-based position of `item`.
    pub fn position_of(&self, item: ItemId) -> Result<usize, PrefError> {
        self.position.get(&item).copied().ok_or(PrefError::UnknownItem(item))
    }

    /// The ranking induced on `items`, with positions renumbered from 1.
    pub fn restrict(&self, items: &[ItemId]) -> Result<Self, PrefError> {
        let mut keyed = items
            .iter()
            .map(|&item| self.position_of(item).map(|p| (p, item)))
            .collect::<Result<Vec<_>, _>>()?;
        keyed.sort_unstable();
        Self::from_order(keyed.into_iter().map(|(_, item)| item).collect())
    }

    /// The `k` most preferred items.
    pub fn top(&self, k: usize) -> &[ItemId] {
        &self.order[..k.min(self.order.len())]
    }
}

/// 1-based position of `item` in `ranking`.
pub fn position_of(ranking: &GroundTruthRanking, item: ItemId) -> Result<usize, PrefError> {
    ranking.position_of(item)
}
