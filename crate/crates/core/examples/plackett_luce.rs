//! Ranking probabilities, pairwise preferences and sampling under the
//! Plackett-Luce model.
//!
//! `cargo run --example plackett_luce`

use std::collections::HashMap;

use prefelicit::plackett::{laplace_smooth, pairwise_probability, ranking_probability, sample_topk, ScoreVector};
use prefelicit::ItemId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let log_scores = [1.2, 0.4, 0.0, -0.7];
    let scores = ScoreVector::from_log_scores(&log_scores)?;
    println!("weights: {:?}", scores.weights().iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());

    let ranking = [ItemId(0), ItemId(1), ItemId(2), ItemId(3)];
    println!("P(0 > 1 > 2 > 3) = {:.4}", ranking_probability(&scores, &ranking)?);
    println!("P(0 beats 3)     = {:.4}", pairwise_probability(log_scores[0], log_scores[3])?);
    for i in 0..scores.len() {
        println!("P(item {i} first) = {:.4}", scores.first_place_probability(ItemId(i)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 20_000;
    let mut tops: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        let top2 = sample_topk(&scores, 2, &mut rng)?;
        *tops.entry(top2.ordered().iter().map(|i| i.0).collect()).or_default() += 1;
    }
    let mut tops: Vec<_> = tops.into_iter().collect();
    tops.sort_by(|a, b| b.1.cmp(&a.1));
    println!("most frequent top-2 prefixes over {draws} draws:");
    for (prefix, count) in tops.iter().take(4) {
        println!("  {prefix:?}: {:.4}", *count as f64 / draws as f64);
    }

    let smoothed = laplace_smooth(&[5.0, 0.0, 1.0, 0.0], 0.1)?;
    println!("smoothed counts: {:?}", smoothed.probs().iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    Ok(())
}
