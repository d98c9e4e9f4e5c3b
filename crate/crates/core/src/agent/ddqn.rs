use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{td_loss_and_grad, Adam, LossSample, Mlp};
use super::per::PrioritizedReplay;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Linear ε decay from `start` to `end` over `decay_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            decay_steps: 10_000,
        }
    }
}

pub fn epsilon_at(step: u64, schedule: &EpsilonSchedule) -> f64 {
    if schedule.decay_steps == 0 || step >= schedule.decay_steps {
        return schedule.end;
    }
    let frac = step as f64 / schedule.decay_steps as f64;
    schedule.start + (schedule.end - schedule.start) * frac
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdqnConfig {
    pub input_dim: usize,
    pub n_actions: usize,
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    /// Learning rate reached after `learning_rate_decay_steps` training
    /// steps (linear); `None` keeps it constant.
    pub learning_rate_end: Option<f64>,
    pub learning_rate_decay_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Training steps between hard copies into the evaluation network.
    pub sync_period: u64,
    pub gamma: f64,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    /// Training steps over which β is annealed to its final value.
    pub per_beta_steps: u64,
    pub per_eps: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        DdqnConfig {
            input_dim: super::STATE_DIM,
            n_actions: crate::actions::ACTION_COUNT,
            hidden: [64, 64],
            learning_rate: 1e-3,
            learning_rate_end: None,
            learning_rate_decay_steps: 0,
            batch_size: 64,
            buffer_capacity: 20_000,
            sync_period: 100,
            gamma: 0.9,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_beta_steps: 10_000,
            per_eps: 1e-3,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl DdqnConfig {
    pub fn layer_sizes(&self) -> [usize; 4] {
        [self.input_dim, self.hidden[0], self.hidden[1], self.n_actions]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if self.input_dim == 0 || self.n_actions == 0 || self.hidden.contains(&0) {
            return bad("network dimensions must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.learning_rate_end.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
            return bad("learning_rate_end must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.sync_period == 0 {
            return bad("batch_size, buffer_capacity and sync_period must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.per_alpha > 0.0) || !(self.per_eps > 0.0) {
            return bad("per_alpha and per_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon.start) || !(0.0..=1.0).contains(&self.epsilon.end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub s: Vec<T>,
    pub a: usize,
    pub r: T,
    pub s_next: Vec<T>,
    pub done: bool,
}

/// First index of the largest value among `allowed` entries.
pub fn masked_argmax<T: Real>(q: &[T], mask: Option<&[bool]>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// ε-greedy choice among legal actions. Always draws one uniform for the
/// coin, plus one index draw when exploring.
pub fn select_action<T: Real, R: Rng + ?Sized>(q: &[T], epsilon: f64, mask: &[bool], rng: &mut R) -> Result<usize> {
    if mask.len() != q.len() {
        return Err(Error::Invalid(format!("mask length {} != {}", mask.len(), q.len())));
    }
    let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if legal.is_empty() {
        return Err(Error::State("no legal action".into()));
    }
    if rng.gen::<f64>() < epsilon {
        Ok(legal[rng.gen_range(0..legal.len())])
    } else {
        Ok(masked_argmax(q, Some(mask)).expect("mask has a legal action"))
    }
}

/// `r` when `done`, else `r + γ·Q_eval(s', argmax_a Q_sel(s', a))`.
pub fn ddqn_target<T: Real>(r: T, s_next: &[T], done: bool, gamma: T, selection: &Mlp<T>, evaluation: &Mlp<T>) -> T {
    if done {
        return r;
    }
    let a = masked_argmax(&selection.forward(s_next), None).expect("non-empty output");
    r + gamma * evaluation.forward(s_next)[a]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainReport {
    pub loss: f64,
    pub mean_abs_td: f64,
    pub beta: f64,
}

/// Double DQN learner with prioritized replay.
#[derive(Clone, Debug)]
pub struct DdqnAgent<T> {
    pub config: DdqnConfig,
    selection: Mlp<T>,
    evaluation: Mlp<T>,
    optimizer: Adam<T>,
    buffer: PrioritizedReplay<Transition<T>>,
    train_steps: u64,
}

impl<T: Real> DdqnAgent<T> {
    pub fn new<R: Rng + ?Sized>(config: DdqnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let selection = Mlp::glorot(&config.layer_sizes(), rng)?;
        let evaluation = selection.clone();
        let optimizer = Adam::new(selection.num_params(), T::lit(config.learning_rate));
        let buffer = PrioritizedReplay::new(config.buffer_capacity, config.per_alpha, config.per_eps);
        Ok(DdqnAgent {
            config,
            selection,
            evaluation,
            optimizer,
            buffer,
            train_steps: 0,
        })
    }

    pub fn selection(&self) -> &Mlp<T> {
        &self.selection
    }

    pub fn evaluation(&self) -> &Mlp<T> {
        &self.evaluation
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn buffer(&self) -> &PrioritizedReplay<Transition<T>> {
        &self.buffer
    }

    pub fn q_values(&self, s: &[T]) -> Vec<T> {
        self.selection.forward(s)
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &[T], epsilon: f64, mask: &[bool], rng: &mut R) -> Result<usize> {
        select_action(&self.q_values(s), epsilon, mask, rng)
    }

    pub fn observe(&mut self, t: Transition<T>) {
        self.buffer.push(t);
    }

    pub fn beta(&self) -> f64 {
        let c = &self.config;
        if c.per_beta_steps == 0 {
            return c.per_beta_end;
        }
        let frac = (self.train_steps as f64 / c.per_beta_steps as f64).min(1.0);
        c.per_beta_start + (c.per_beta_end - c.per_beta_start) * frac
    }

    pub fn learning_rate(&self) -> f64 {
        let c = &self.config;
        match c.learning_rate_end {
            Some(end) if c.learning_rate_decay_steps > 0 => {
                let frac = (self.train_steps as f64 / c.learning_rate_decay_steps as f64).min(1.0);
                c.learning_rate + (end - c.learning_rate) * frac
            }
            _ => c.learning_rate,
        }
    }

    /// Hard copy of the selection network into the evaluation network.
    pub fn sync_evaluation(&mut self) {
        self.evaluation.copy_from(&self.selection);
    }

    /// One gradient step on `batch` with importance `weights`. Returns the
    /// loss and per-sample |TD error|.
    pub fn train_step(&mut self, batch: &[&Transition<T>], weights: &[T]) -> Result<(T, Vec<T>)> {
        if batch.is_empty() {
            return Err(Error::State("empty training batch".into()));
        }
        let gamma = T::lit(self.config.gamma);
        let targets: Vec<T> = batch
            .iter()
            .map(|t| ddqn_target(t.r, &t.s_next, t.done, gamma, &self.selection, &self.evaluation))
            .collect();
        let samples: Vec<LossSample<'_, T>> = batch
            .iter()
            .zip(&targets)
            .zip(weights)
            .map(|((t, &target), &weight)| LossSample {
                input: &t.s,
                action: t.a,
                target,
                weight,
            })
            .collect();
        let (loss, grad, tds) = td_loss_and_grad(&self.selection, &samples);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericDomain("non-finite loss or gradient".into()));
        }
        self.optimizer.lr = T::lit(self.learning_rate());
        self.optimizer.step(self.selection.params_mut(), &grad);
        self.train_steps += 1;
        if self.train_steps % self.config.sync_period == 0 {
            self.sync_evaluation();
        }
        Ok((loss, tds.into_iter().map(|d| d.abs()).collect()))
    }

    /// Samples a prioritized batch, trains on it and refreshes priorities.
    /// Does nothing until the buffer holds one full batch.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<TrainReport>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let beta = self.beta();
        let sample = self.buffer.sample(self.config.batch_size, beta, rng)?;
        let batch: Vec<Transition<T>> = sample.indices.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let refs: Vec<&Transition<T>> = batch.iter().collect();
        let weights: Vec<T> = sample.weights.iter().map(|&w| T::lit(w)).collect();
        let (loss, tds) = self.train_step(&refs, &weights)?;
        let tds: Vec<f64> = tds.iter().map(|d| d.as_f64()).collect();
        self.buffer.update_priorities(&sample.indices, &tds);
        Ok(Some(TrainReport {
            loss: loss.as_f64(),
            mean_abs_td: tds.iter().sum::<f64>() / tds.len() as f64,
            beta,
        }))
    }

    /// Writes both networks: one JSON header line, then the selection and
    /// evaluation parameters as little-endian f64.
    pub fn save_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.to_string(),
            version: 1,
            layers: self.selection.sizes().to_vec(),
            params_per_net: self.selection.num_params(),
            nets: vec!["selection".into(), "evaluation".into()],
            train_steps: self.train_steps,
            config: self.config.clone(),
        };
        let io = |e: std::io::Error| Error::State(format!("checkpoint write failed: {e}"));
        let line = serde_json::to_string(&header).map_err(|e| Error::State(e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
        for net in [&self.selection, &self.evaluation] {
            for p in net.params() {
                w.write_all(&p.as_f64().to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    /// Restores networks from [`save_checkpoint`](Self::save_checkpoint)
    /// output. The replay buffer and optimizer start fresh.
    pub fn load_checkpoint<B: BufRead, R: Rng + ?Sized>(mut r: B, rng: &mut R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Invalid(format!("checkpoint read failed: {e}"));
        let mut line = String::new();
        r.read_line(&mut line).map_err(io)?;
        let header: CheckpointHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Invalid(format!("checkpoint header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT || header.version != 1 {
            return Err(Error::Invalid("unsupported checkpoint format".into()));
        }
        if header.layers != header.config.layer_sizes() {
            return Err(Error::Invalid("checkpoint layers disagree with its config".into()));
        }
        let mut agent = DdqnAgent::new(header.config, rng)?;
        if agent.selection.num_params() != header.params_per_net {
            return Err(Error::Invalid("checkpoint parameter count mismatch".into()));
        }
        let mut buf = [0u8; 8];
        for net in [&mut agent.selection, &mut agent.evaluation] {
            for p in net.params_mut() {
                r.read_exact(&mut buf).map_err(io)?;
                let v = f64::from_le_bytes(buf);
                if !v.is_finite() {
                    return Err(Error::Invalid("non-finite parameter in checkpoint".into()));
                }
                *p = T::lit(v);
            }
        }
        agent.train_steps = header.train_steps;
        Ok(agent)
    }
}

const CHECKPOINT_FORMAT: &str = "critgen-ddqn";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    layers: Vec<usize>,
    params_per_net: usize,
    nets: Vec<String>,
    train_steps: u64,
    config: DdqnConfig,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_schedule_points() {
        let s = EpsilonSchedule::default();
        assert_eq!(epsilon_at(0, &s), 1.0);
        assert!((epsilon_at(5_000, &s) - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(10_000, &s), 0.1);
        assert_eq!(epsilon_at(99_999, &s), 0.1);
    }

    #[test]
    fn terminal_and_bootstrapped_targets() {
        let net = Mlp::<f64>::zeros(&[2, 1]).unwrap();
        assert_eq!(ddqn_target(-1.0, &[0.0, 0.0], true, 0.9, &net, &net), -1.0);
        // evaluation net outputs a constant 1.0 via its bias
        let eval = Mlp::from_params(&[2, 1], vec![0.0, 0.0, 1.0]).unwrap();
        assert!((ddqn_target(0.5, &[0.3, 0.3], false, 0.9, &net, &eval) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn masked_argmax_skips_illegal_best() {
        let q = [0.1, 5.0, 2.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&q, 0.0, &[true, false, true, true], &mut rng).unwrap(), 2);
        assert_eq!(select_action(&q, 0.0, &[true; 4], &mut rng).unwrap(), 1);
        assert!(select_action(&q, 0.0, &[false; 4], &mut rng).is_err());
    }

    #[test]
    fn sync_makes_nets_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = DdqnAgent::<f64>::new(
            DdqnConfig {
                batch_size: 4,
                ..DdqnConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let s = vec![0.5; 19];
        for a in 0..8 {
            agent.observe(Transition {
                s: s.clone(),
                a,
                r: 1.0,
                s_next: s.clone(),
                done: a % 2 == 0,
            });
        }
        let before = agent.evaluation().clone();
        agent.learn(&mut rng).unwrap().unwrap();
        assert_eq!(agent.evaluation(), &before);
        assert_ne!(agent.selection(), &before);
        agent.sync_evaluation();
        assert_eq!(agent.q_values(&s), agent.evaluation().forward(&s));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let agent = DdqnAgent::<f64>::new(DdqnConfig::default(), &mut rng).unwrap();
        let mut bytes = Vec::new();
        agent.save_checkpoint(&mut bytes).unwrap();
        let back = DdqnAgent::<f64>::load_checkpoint(&bytes[..], &mut rng).unwrap();
        assert_eq!(back.selection(), agent.selection());
        assert_eq!(back.evaluation(), agent.evaluation());
        assert!(DdqnAgent::<f64>::load_checkpoint(&bytes[..bytes.len() - 3], &mut rng).is_err());
    }
}
