//! Action-selection policies driven by the episode runner.

use critgen_core::actions::ACTION_COUNT;
use critgen_core::agent::{epsilon_at, StateVector, Transition};
use critgen_core::Agent;
use rand::seq::IteratorRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

pub trait Policy {
    fn name(&self) -> &str;

    /// Picks an action index for `state` among the entries `mask` allows.
    fn choose(&mut self, state: &StateVector, mask: &[bool; ACTION_COUNT], step: usize) -> Result<usize>;

    /// Receives the transition produced by the last choice.
    fn observe(&mut self, _transition: Transition<f64>) -> Result<()> {
        Ok(())
    }
}

/// Uniform choice among legal actions.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(rng: ChaCha8Rng) -> Self {
        RandomPolicy { rng }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&mut self, _state: &StateVector, mask: &[bool; ACTION_COUNT], _step: usize) -> Result<usize> {
        (0..ACTION_COUNT)
            .filter(|&i| mask[i])
            .choose(&mut self.rng)
            .ok_or_else(|| HarnessError::Validation("no legal action".into()))
    }
}

/// Plays a fixed action list, then repeats `fallback`. Ignores the mask so
/// recorded episodes can be reproduced verbatim.
pub struct ScriptedPolicy {
    actions: Vec<usize>,
    fallback: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<usize>, fallback: usize) -> Self {
        ScriptedPolicy { actions, fallback }
    }

    /// Never spawns anything: keeps re-applying "no rain".
    pub fn never_spawn() -> Self {
        ScriptedPolicy::new(Vec::new(), 0)
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn choose(&mut self, _state: &StateVector, _mask: &[bool; ACTION_COUNT], step: usize) -> Result<usize> {
        let a = self.actions.get(step).copied().unwrap_or(self.fallback);
        if a >= ACTION_COUNT {
            return Err(HarnessError::Validation(format!("action index {a} out of range")));
        }
        Ok(a)
    }
}

/// Frozen agent acting epsilon-greedily with a fixed epsilon.
pub struct GreedyPolicy<'a> {
    agent: &'a Agent,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(agent: &'a Agent, epsilon: f64, rng: ChaCha8Rng) -> Self {
        GreedyPolicy { agent, epsilon, rng }
    }
}

impl Policy for GreedyPolicy<'_> {
    fn name(&self) -> &str {
        "agent"
    }

    fn choose(&mut self, state: &StateVector, mask: &[bool; ACTION_COUNT], _step: usize) -> Result<usize> {
        Ok(self.agent.act(&state.to_scalars(), self.epsilon, mask, &mut self.rng)?)
    }
}

/// Learning agent: epsilon follows the configured schedule over
/// environment steps, and every observed transition triggers
/// `updates_per_step` gradient steps.
pub struct LearningPolicy<'a> {
    agent: &'a mut Agent,
    rng: &'a mut ChaCha8Rng,
    learn_rng: &'a mut ChaCha8Rng,
    env_steps: &'a mut u64,
    updates_per_step: usize,
    /// Losses of the gradient steps taken so far.
    pub losses: Vec<f64>,
}

impl<'a> LearningPolicy<'a> {
    pub fn new(
        agent: &'a mut Agent,
        rng: &'a mut ChaCha8Rng,
        learn_rng: &'a mut ChaCha8Rng,
        env_steps: &'a mut u64,
        updates_per_step: usize,
    ) -> Self {
        LearningPolicy {
            agent,
            rng,
            learn_rng,
            env_steps,
            updates_per_step,
            losses: Vec::new(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(*self.env_steps, &self.agent.config.epsilon)
    }
}

impl Policy for LearningPolicy<'_> {
    fn name(&self) -> &str {
        "agent"
    }

    fn choose(&mut self, state: &StateVector, mask: &[bool; ACTION_COUNT], _step: usize) -> Result<usize> {
        let eps = self.epsilon();
        Ok(self.agent.act(&state.to_scalars(), eps, mask, &mut *self.rng)?)
    }

    fn observe(&mut self, transition: Transition<f64>) -> Result<()> {
        self.agent.observe(transition);
        *self.env_steps += 1;
        for _ in 0..self.updates_per_step {
            if let Some(report) = self.agent.learn(&mut *self.learn_rng)? {
                self.losses.push(report.loss);
            }
        }
        Ok(())
    }
}
