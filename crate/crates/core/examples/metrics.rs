//! Ranking-quality metrics: Kendall tau-b, Precision@k, NDCG@k and the
//! max-rank percentile of a menu.
//!
//! `cargo run --example metrics`

use std::collections::{HashMap, HashSet};

use prefelicit::metrics::{kendall_tau, max_rank_percentile, ndcg_at_k, pair_counts, precision_at_k, RankedList};
use prefelicit::{GroundTruthRanking, ItemId, Menu};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let items: Vec<ItemId> = (0..6).map(ItemId).collect();
    let predicted = RankedList::from_scores(&items, &[0.9, 0.8, 0.1, 0.5, 0.5, -0.2])?;
    let truth_scores = RankedList::from_scores(&items, &[6.0, 4.0, 3.0, 5.0, 2.0, 1.0])?;
    let counts = pair_counts(&predicted, &truth_scores)?;
    println!("pair counts: {counts:?}");
    println!("kendall tau-b: {:.4}", kendall_tau(&predicted, &truth_scores)?);

    let recommended = [ItemId(0), ItemId(1), ItemId(3), ItemId(4)];
    let relevant: HashSet<ItemId> = [ItemId(0), ItemId(3), ItemId(1)].into();
    let gains: HashMap<ItemId, f64> = relevant.iter().map(|&i| (i, 1.0)).collect();
    for k in [1, 2, 4] {
        println!("P@{k} = {:.3}  NDCG@{k} = {:.3}", precision_at_k(&recommended, &relevant, k)?, ndcg_at_k(&recommended, &gains, k)?);
    }

    let truth = GroundTruthRanking::from_order(vec![ItemId(0), ItemId(3), ItemId(1), ItemId(2), ItemId(4), ItemId(5)])?;
    for menu in [vec![ItemId(0)], vec![ItemId(2), ItemId(5)], vec![ItemId(5)]] {
        let ids: Vec<usize> = menu.iter().map(|i| i.0).collect();
        let m = Menu::from_items(menu, 2)?;
        println!("menu {ids:?}: max-rank percentile {:.2}", max_rank_percentile(&m, &truth)?);
    }
    Ok(())
}
