use critgen_core::agent::{
    epsilon_at, td_loss_and_grad, DdqnAgent, DdqnConfig, EpsilonSchedule, LossSample, Mlp, PrioritizedReplay,
    Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Deterministic 4-state, 2-action MDP: (next state, reward) per (s, a).
const MDP: [[(usize, f64); 2]; 4] = [
    [(1, 0.0), (0, 0.2)],
    [(2, 0.0), (0, 0.1)],
    [(3, 1.0), (1, -0.5)],
    [(0, 0.0), (3, 0.3)],
];
const GAMMA: f64 = 0.9;

fn value_iteration() -> [[f64; 2]; 4] {
    let mut q = [[0.0f64; 2]; 4];
    loop {
        let mut next = q;
        let mut delta: f64 = 0.0;
        for s in 0..4 {
            for a in 0..2 {
                let (s2, r) = MDP[s][a];
                next[s][a] = r + GAMMA * q[s2][0].max(q[s2][1]);
                delta = delta.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if delta < 1e-10 {
            return q;
        }
    }
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 4];
    v[s] = 1.0;
    v
}

fn train_tiny(sync_period: u64, seed: u64, steps: u64) -> f64 {
    train_tiny_lr(sync_period, seed, steps, 1e-3)
}

fn train_tiny_lr(sync_period: u64, seed: u64, steps: u64, lr: f64) -> f64 {
    let q_star = value_iteration();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = DdqnConfig {
        input_dim: 4,
        n_actions: 2,
        hidden: [32, 32],
        learning_rate: lr,
        learning_rate_end: Some(1e-5),
        learning_rate_decay_steps: steps,
        batch_size: 32,
        buffer_capacity: 1000,
        sync_period,
        gamma: GAMMA,
        ..DdqnConfig::default()
    };
    let mut agent = DdqnAgent::<f64>::new(config, &mut rng).unwrap();
    let mut s = 0;
    for _ in 0..steps {
        let a = rng.gen_range(0..2);
        let (s2, r) = MDP[s][a];
        agent.observe(Transition {
            s: one_hot(s),
            a,
            r,
            s_next: one_hot(s2),
            done: false,
        });
        agent.learn(&mut rng).unwrap();
        s = if rng.gen::<f64>() < 0.1 { rng.gen_range(0..4) } else { s2 };
    }
    let mut err = 0.0f64;
    for (s, row) in q_star.iter().enumerate() {
        let q = agent.q_values(&one_hot(s));
        for a in 0..2 {
            err = err.max((q[a] - row[a]).abs());
        }
    }
    err
}

#[test]
fn ddqn_matches_value_iteration_on_tiny_mdp() {
    let err = train_tiny(100, 11, 20_000);
    assert!(err < 1e-2, "max |Q - Q*| = {err}");
}

#[test]
fn single_network_mode_matches_value_iteration() {
    let err = train_tiny(1, 12, 20_000);
    assert!(err < 1e-2, "max |Q - Q*| = {err}");
}


fn batch_loss(net: &Mlp<f64>, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64], weights: &[f64]) -> (f64, Vec<f64>) {
    let samples: Vec<LossSample<'_, f64>> = inputs
        .iter()
        .zip(actions)
        .zip(targets.iter().zip(weights))
        .map(|((x, &action), (&target, &weight))| LossSample {
            input: x,
            action,
            target,
            weight,
        })
        .collect();
    let (loss, grad, _) = td_loss_and_grad(net, &samples);
    (loss, grad)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for _ in 0..20 {
        let sizes = [19, rng.gen_range(4..16), rng.gen_range(4..16), 45];
        let mut net = Mlp::<f64>::glorot(&sizes, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.gen_range(-0.1..0.1);
        }
        let n = rng.gen_range(1..8);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..19).map(|_| rng.gen::<f64>()).collect()).collect();
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..45)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let (_, analytic) = batch_loss(&net, &inputs, &actions, &targets, &weights);
        for i in 0..net.num_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up_pattern: Vec<Vec<bool>> = inputs.iter().map(|x| net.activation_pattern(x)).collect();
            let up = batch_loss(&net, &inputs, &actions, &targets, &weights).0;
            net.params_mut()[i] = orig - h;
            let down_pattern: Vec<Vec<bool>> = inputs.iter().map(|x| net.activation_pattern(x)).collect();
            let down = batch_loss(&net, &inputs, &actions, &targets, &weights).0;
            net.params_mut()[i] = orig;
            if up_pattern != down_pattern {
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
            checked += 1;
        }
    }
    assert!(skipped * 100 < checked, "kink guard skipped {skipped} of {checked}");
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn per_frequencies_follow_powered_priorities() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut buf = PrioritizedReplay::new(16, 0.6, 1e-3);
    let tds: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..5.0)).collect();
    for (i, &td) in tds.iter().enumerate() {
        buf.push_with_td(i, td);
    }
    let draws = 100_000;
    let sample = buf.sample(draws, 0.5, &mut rng).unwrap();
    let mut counts = [0usize; 10];
    for &i in &sample.indices {
        counts[i] += 1;
    }
    let powered: Vec<f64> = tds.iter().map(|td| (td + 1e-3f64).powf(0.6)).collect();
    let total: f64 = powered.iter().sum();
    let chi2: f64 = counts
        .iter()
        .zip(&powered)
        .map(|(&c, p)| {
            let e = draws as f64 * p / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 {chi2}, p {p_value}");
}

#[test]
fn epsilon_midpoint_on_custom_schedule() {
    let s = EpsilonSchedule {
        start: 1.0,
        end: 0.1,
        decay_steps: 200,
    };
    assert!((epsilon_at(100, &s) - 0.55).abs() < 1e-12);
}
