//! Active elicitation for one user: each round asks the pair whose answer is
//! expected to improve the recommended menu the most, and compares the result
//! with asking random pairs.
//!
//! `cargo run --release --example active_query`

use prefelicit::metrics::max_rank_percentile;
use prefelicit::models::{train_pairwise, MatrixFactorization, TrainConfig};
use prefelicit::sampler::{random_query, recommend, simulate_oracle, utility_gain_query, QueryContext, QueryPool, SamplerConfig};
use prefelicit::utility::{McConfig, MediaUtility};
use prefelicit::{GroundTruthRanking, ItemId, UserId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ITEMS: usize = 25;
const ROUNDS: usize = 15;
const MENU: usize = 2;

fn elicit(truth: &GroundTruthRanking, active: bool) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let user = UserId(0);
    let universe: Vec<ItemId> = (0..ITEMS).map(ItemId).collect();
    let utility = MediaUtility::default();
    let train = TrainConfig { learning_rate: 0.1, epochs: 30, l2_lambda: 0.05, seed: 3, init_std: Some(0.1), ..TrainConfig::default() };
    let mc = McConfig { samples: 200, seed: 4, ..McConfig::default() };
    let sampler = SamplerConfig { pool_size: 20, mc: mc.clone(), menu_size: MENU, ..SamplerConfig::default() };

    let mut model = MatrixFactorization::from_config(1, ITEMS, 4, &train);
    let mut pool = QueryPool::new(user, universe.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut history = Vec::new();
    let mut trace = Vec::new();
    for round in 0..ROUNDS {
        let candidates = pool.draw(sampler.pool_size, &mut rng);
        let pair = if active {
            let ctx = QueryContext { user, universe: &universe, history: &history };
            utility_gain_query(&model, &ctx, &candidates, &utility, &SamplerConfig { seed: round as u64, ..sampler.clone() })?
        } else {
            random_query(&candidates, &mut rng)?
        };
        pool.mark_asked(&pair);
        history.push(simulate_oracle(truth, &pair)?);
        train_pairwise(&mut model, &history, &train.with_seed(round as u64))?;
        let choice = recommend(&model, user, &universe, &utility, MENU, &mc)?;
        trace.push(max_rank_percentile(&choice.menu, truth)?);
    }
    Ok(trace)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut order: Vec<ItemId> = (0..ITEMS).map(ItemId).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let truth = GroundTruthRanking::from_order(order)?;

    let active = elicit(&truth, true)?;
    let random = elicit(&truth, false)?;
    println!("round  utility-gain  random   (max-rank percentile of the recommended menu)");
    for (r, (a, b)) in active.iter().zip(&random).enumerate() {
        println!("{:>5}  {a:>12.3}  {b:>6.3}", r + 1);
    }
    Ok(())
}
