use prefelicit::models::{
    clone_and_finetune, pairwise_loss, train_pairwise, train_rating_mse, rating_mse, triplet_gradient, MatrixFactorization, NeuralConfig, NeuralPreferenceModel,
    ScoreModel, TrainConfig,
};
use prefelicit::datasets::RatingRecord;
use prefelicit::plackett::log_sigmoid;
use prefelicit::prefcore::{ComparisonTriplet, ItemId, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn triplets(rng: &mut ChaCha8Rng, users: usize, items: usize, n: usize) -> Vec<ComparisonTriplet> {
    (0..n)
        .map(|_| {
            let w = rng.random_range(0..items);
            let l = (w + rng.random_range(1..items)) % items;
            ComparisonTriplet::new(UserId(rng.random_range(0..users)), ItemId(w), ItemId(l)).unwrap()
        })
        .collect()
}

/// Central-difference check of every partial derivative; returns the worst
/// `|a - n| / max(|a|, |n|, 1e-3)`.
fn worst_component_error<M: ScoreModel>(model: &M, t: &ComparisonTriplet, noise: Option<&[f64]>) -> f64 {
    let ll = |m: &M| log_sigmoid(m.score_with_noise(t.user, t.winner, noise) - m.score_with_noise(t.user, t.loser, noise));
    let analytic = triplet_gradient(model, t, noise).unwrap();
    let mut probe = model.clone();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let base = probe.params()[k];
        probe.params_mut()[k] = base + h;
        let up = ll(&probe);
        probe.params_mut()[k] = base - h;
        let down = ll(&probe);
        probe.params_mut()[k] = base;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-3));
    }
    worst
}

#[test]
fn matrix_factorization_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in [1, 2, 8, 100] {
        let model = MatrixFactorization::new(3, 5, k, 0.7, &mut rng);
        for t in triplets(&mut rng, 3, 5, 5) {
            let e = worst_component_error(&model, &t, None);
            assert!(e < 1e-5, "K={k}: {e}");
        }
    }
}

#[test]
fn neural_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let features: Vec<f64> = (0..5 * 2).map(|_| rng.random::<f64>()).collect();
    for (feats, noise_dim) in [(None, 0), (Some((2, features.clone())), 0), (Some((2, features)), 3)] {
        let cfg = NeuralConfig { embed_dim: 3, hidden: [5, 4], noise_dim, train_with_noise: false };
        let mut model = NeuralPreferenceModel::new(2, 5, feats, cfg, 0.6, &mut rng).unwrap();
        // zero biases put ReLU inputs exactly on the kink; check at a generic point
        model.params_mut().iter_mut().for_each(|p| *p += rng.random_range(-0.1..0.1));
        let z: Vec<f64> = (0..noise_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for t in triplets(&mut rng, 2, 5, 5) {
            let noise = (noise_dim > 0).then_some(z.as_slice());
            let e = worst_component_error(&model, &t, noise);
            assert!(e < 1e-4, "noise_dim={noise_dim}: {e}");
        }
    }
}

#[test]
fn gradients_only_touch_the_triplets_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = MatrixFactorization::new(3, 6, 4, 0.5, &mut rng);
    let t = ComparisonTriplet::new(UserId(1), ItemId(2), ItemId(4)).unwrap();
    let g = triplet_gradient(&model, &t, None).unwrap();
    let touched: Vec<usize> = g.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    // user 1 block plus item 2 and item 4 blocks
    assert!(!touched.is_empty());
    assert!(touched.len() <= 12);
}

#[test]
fn training_increases_the_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = triplets(&mut rng, 4, 8, 60);
    let mut model = MatrixFactorization::new(4, 8, 3, 0.1, &mut rng);
    let before = pairwise_loss(&model, &data).unwrap();
    let report = train_pairwise(&mut model, &data, &TrainConfig { epochs: 30, l2_lambda: 0.0, ..TrainConfig::default() }).unwrap();
    assert!(pairwise_loss(&model, &data).unwrap() > before);
    assert_eq!(report.epoch_objective.len(), 30);
}

#[test]
fn zero_epoch_finetune_returns_the_same_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = MatrixFactorization::new(2, 4, 3, 0.3, &mut rng);
    let t = ComparisonTriplet::new(UserId(0), ItemId(1), ItemId(3)).unwrap();
    let tuned = clone_and_finetune(&model, &t, &[], &TrainConfig { epochs: 0, ..TrainConfig::default() });
    assert_eq!(tuned.params(), model.params());
    let moved = clone_and_finetune(&model, &t, &[], &TrainConfig { epochs: 3, ..TrainConfig::default() });
    assert!(moved.score(UserId(0), ItemId(1)) - moved.score(UserId(0), ItemId(3)) > model.score(UserId(0), ItemId(1)) - model.score(UserId(0), ItemId(3)));
}

#[test]
fn rating_mf_fits_a_rank_one_matrix() {
    let u = [1.0, 0.5, 1.5, 0.8, 1.2];
    let v = [2.0, 1.0, 0.5, 1.5, 0.9];
    let ratings: Vec<RatingRecord> = (0..5)
        .flat_map(|a| (0..5).map(move |b| RatingRecord { user: UserId(a), item: ItemId(b), rating: u[a] * v[b], timestamp: None }))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = MatrixFactorization::new(5, 5, 4, 0.3, &mut rng);
    train_rating_mse(&mut model, &ratings, &TrainConfig { learning_rate: 0.02, epochs: 3000, l2_lambda: 0.0, ..TrainConfig::default() }).unwrap();
    let mse = rating_mse(&model, &ratings);
    assert!(mse < 1e-3, "mse {mse}");
}
