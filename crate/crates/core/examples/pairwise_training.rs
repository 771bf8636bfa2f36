//! Fits a matrix-factorisation model and a feature-aware neural model to
//! pairwise comparisons drawn from a hidden preference model, then checks how
//! well each recovers the hidden item order.
//!
//! `cargo run --release --example pairwise_training`

use prefelicit::metrics::{kendall_tau, RankedList};
use prefelicit::models::{pairwise_loss, train_pairwise, MatrixFactorization, NeuralConfig, NeuralPreferenceModel, ScoreModel, TrainConfig};
use prefelicit::plackett::sigmoid;
use prefelicit::{ComparisonTriplet, ItemId, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const USERS: usize = 8;
const ITEMS: usize = 30;
const FEATURES: usize = 4;

fn mean_tau<M: ScoreModel>(model: &M, truth: &MatrixFactorization) -> Result<f64, Box<dyn std::error::Error>> {
    let items: Vec<ItemId> = (0..ITEMS).map(ItemId).collect();
    let mut total = 0.0;
    for u in (0..USERS).map(UserId) {
        let a = RankedList::from_scores(&items, &model.scores_for(u, &items))?;
        let b = RankedList::from_scores(&items, &truth.scores_for(u, &items))?;
        total += kendall_tau(&a, &b)?;
    }
    Ok(total / USERS as f64)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let truth = MatrixFactorization::new(USERS, ITEMS, 3, 1.0, &mut rng);

    let comparisons: Vec<ComparisonTriplet> = (0..1500)
        .map(|_| {
            let u = UserId(rng.random_range(0..USERS));
            let a = ItemId(rng.random_range(0..ITEMS));
            let b = ItemId((a.0 + rng.random_range(1..ITEMS)) % ITEMS);
            let a_wins = rng.random::<f64>() < sigmoid(truth.score(u, a) - truth.score(u, b));
            let (w, l) = if a_wins { (a, b) } else { (b, a) };
            ComparisonTriplet::new(u, w, l)
        })
        .collect::<Result<_, _>>()?;
    println!("{} noisy comparisons over {USERS} users and {ITEMS} items", comparisons.len());

    let cfg = TrainConfig { learning_rate: 0.05, epochs: 60, l2_lambda: 0.01, seed: 1, ..TrainConfig::default() };
    let mut mf = MatrixFactorization::from_config(USERS, ITEMS, 3, &cfg);
    println!("MF before training: loglik {:.1}, tau {:.3}", pairwise_loss(&mf, &comparisons)?, mean_tau(&mf, &truth)?);
    let report = train_pairwise(&mut mf, &comparisons, &cfg)?;
    println!("MF after {} epochs: loglik {:.1}, tau {:.3}", report.epoch_objective.len(), pairwise_loss(&mf, &comparisons)?, mean_tau(&mf, &truth)?);

    let features: Vec<f64> = (0..ITEMS * FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nn_cfg = NeuralConfig { embed_dim: 8, hidden: [16, 8], noise_dim: 0, train_with_noise: false };
    let mut nn = NeuralPreferenceModel::from_config(USERS, ITEMS, Some((FEATURES, features)), nn_cfg, &cfg)?;
    train_pairwise(&mut nn, &comparisons, &TrainConfig { learning_rate: 0.02, ..cfg })?;
    println!("neural model: loglik {:.1}, tau {:.3} ({} parameters)", pairwise_loss(&nn, &comparisons)?, mean_tau(&nn, &truth)?, nn.params().len());
    Ok(())
}
