use std::time::{Duration, Instant};

use critgen_core::agent::StateVector;
use critgen_core::Agent;
use critgen_harness::config::ExperimentConfig;
use critgen_harness::run_training;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn training_improves_reward_and_checkpoint_round_trips() {
    let config = ExperimentConfig::default();
    assert_eq!(config.episodes, 200);
    let start = Instant::now();
    let outcome = run_training(&config, |_| {}).unwrap();
    assert!(start.elapsed() < Duration::from_secs(600), "took {:?}", start.elapsed());
    assert_eq!(outcome.curve.len(), 200);

    let rewards: Vec<f64> = outcome.curve.iter().map(|p| p.mean_reward).collect();
    let (first, last) = (mean(&rewards[..50]), mean(&rewards[150..]));
    assert!(last > first, "first 50 {first:.3}, last 50 {last:.3}");
    assert!(outcome.curve.windows(2).all(|w| w[0].env_steps <= w[1].env_steps));

    let mut bytes = Vec::new();
    outcome.agent.save_checkpoint(&mut bytes).unwrap();
    let loaded = Agent::load_checkpoint(&bytes[..], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mask = [true; 45];
    for _ in 0..100 {
        let s = StateVector(std::array::from_fn(|_| rng.gen_range(0.0..=1.0)));
        let x = s.to_scalars::<f64>();
        assert_eq!(outcome.agent.q_values(&x), loaded.q_values(&x));
        let a = outcome.agent.act(&x, 0.0, &mask, &mut rng).unwrap();
        let b = loaded.act(&x, 0.0, &mask, &mut rng).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let outcome = run_training(
        &ExperimentConfig {
            episodes: 1,
            ..ExperimentConfig::default()
        },
        |_| {},
    )
    .unwrap();
    let mut bytes = Vec::new();
    outcome.agent.save_checkpoint(&mut bytes).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(Agent::load_checkpoint(&bytes[..bytes.len() - 3], &mut rng).is_err());
    assert!(Agent::load_checkpoint(&b"not a header\n"[..], &mut rng).is_err());
}
