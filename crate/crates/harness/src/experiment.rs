//! Training and evaluation drivers.

use critgen_core::agent::Ablation;
use critgen_core::world::LayoutId;
use critgen_core::Agent;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, ExperimentConfig, PolicyKind, TraceMode};
use crate::episode::run_episode;
use crate::error::{HarnessError, Result};
use crate::metrics::{EpisodeSummary, MetricsReport};
use crate::policy::{GreedyPolicy, LearningPolicy, Policy, RandomPolicy};
use crate::trace::{EpisodeTrace, TerminalCause};

const STREAM_AGENT_INIT: u64 = 1;
const STREAM_TRAIN_POLICY: u64 = 2;
const STREAM_LEARN: u64 = 3;
const STREAM_TRAIN_EPISODE: u64 = 4;
const STREAM_EVAL_EPISODE: u64 = 5;
const STREAM_EVAL_POLICY: u64 = 6;

pub fn summarize(episode: usize, trace: &EpisodeTrace) -> EpisodeSummary {
    EpisodeSummary {
        episode,
        layout: trace.header.layout,
        seed: trace.header.seed,
        terminal: trace.end.terminal,
        steps: trace.steps.len(),
        total_reward: trace.end.total_reward,
        ttc: trace.end.ttc,
        max_proc: trace.steps.iter().map(|s| s.proc.proc).fold(0.0, f64::max),
    }
}

/// Per-episode training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub layout: LayoutId,
    pub terminal: TerminalCause,
    pub steps: usize,
    /// Environment steps taken so far, this episode included.
    pub env_steps: u64,
    pub mean_reward: f64,
    pub epsilon: f64,
    /// Mean loss of the gradient steps taken during the episode.
    pub mean_loss: Option<f64>,
}

pub const CURVE_COLUMNS: [&str; 8] = [
    "episode",
    "layout",
    "terminal",
    "steps",
    "env_steps",
    "mean_reward",
    "epsilon",
    "mean_loss",
];

pub struct TrainingOutcome {
    pub agent: Agent,
    pub curve: Vec<CurvePoint>,
    pub env_steps: u64,
}

/// Trains a fresh agent for `config.episodes` episodes, cycling through the
/// training layouts. `on_episode` sees every finished trace.
pub fn run_training(config: &ExperimentConfig, mut on_episode: impl FnMut(&EpisodeTrace)) -> Result<TrainingOutcome> {
    config.validate()?;
    if config.policy != PolicyKind::Agent {
        return Err(HarnessError::Validation("training requires the agent policy".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_AGENT_INIT]));
    let mut agent = Agent::new(config.agent.clone(), &mut init_rng)?;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_TRAIN_POLICY]));
    let mut learn_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_LEARN]));
    let mut env_steps = 0u64;
    let mut curve = Vec::with_capacity(config.episodes);
    for episode in 0..config.episodes {
        let layout = config.train_layouts[episode % config.train_layouts.len()];
        let seed = derive_seed(config.seed, &[STREAM_TRAIN_EPISODE, episode as u64]);
        let mut policy = LearningPolicy::new(
            &mut agent,
            &mut policy_rng,
            &mut learn_rng,
            &mut env_steps,
            config.updates_per_step,
        );
        let epsilon = policy.epsilon();
        let trace = run_episode(&config.episode, layout, seed, &mut policy, &[])?;
        let losses = std::mem::take(&mut policy.losses);
        if !agent.selection().is_finite() {
            return Err(HarnessError::Numeric(format!("network weights diverged in episode {episode}")));
        }
        let summary = summarize(episode, &trace);
        curve.push(CurvePoint {
            episode,
            layout,
            terminal: summary.terminal,
            steps: summary.steps,
            env_steps,
            mean_reward: summary.mean_reward(),
            epsilon,
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
        });
        on_episode(&trace);
    }
    Ok(TrainingOutcome {
        agent,
        curve,
        env_steps,
    })
}

pub struct Evaluation {
    pub report: MetricsReport,
    pub summaries: Vec<EpisodeSummary>,
    /// Traces kept according to the configured [`TraceMode`].
    pub traces: Vec<EpisodeTrace>,
}

/// Episode seed for evaluation episode `i` on the layout at `layout_idx`;
/// identical for every policy.
pub fn eval_seed(config: &ExperimentConfig, layout_idx: usize, i: usize) -> u64 {
    derive_seed(config.seed, &[STREAM_EVAL_EPISODE, layout_idx as u64, i as u64])
}

/// Evaluates `policy` (with `agent` when it is the learned one) for
/// `eval_episodes` episodes per evaluation layout, in parallel.
pub fn run_evaluation(config: &ExperimentConfig, policy: PolicyKind, agent: Option<&Agent>) -> Result<Evaluation> {
    config.validate()?;
    if policy == PolicyKind::Agent && agent.is_none() {
        return Err(HarnessError::Validation("agent evaluation needs a trained agent".into()));
    }
    let jobs: Vec<(usize, LayoutId, usize)> = config
        .eval_layouts
        .iter()
        .enumerate()
        .flat_map(|(li, &l)| (0..config.eval_episodes).map(move |i| (li, l, i)))
        .collect();
    let results: Vec<Result<(EpisodeSummary, Option<EpisodeTrace>)>> = jobs
        .par_iter()
        .map(|&(li, layout, i)| {
            let seed = eval_seed(config, li, i);
            let rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_EVAL_POLICY, li as u64, i as u64]));
            let mut p: Box<dyn Policy> = match (policy, agent) {
                (PolicyKind::Agent, Some(a)) => Box::new(GreedyPolicy::new(a, config.eval_epsilon, rng)),
                _ => Box::new(RandomPolicy::new(rng)),
            };
            let trace = run_episode(&config.episode, layout, seed, p.as_mut(), &[])?;
            let summary = summarize(li * config.eval_episodes + i, &trace);
            let keep = match config.traces {
                TraceMode::None => false,
                TraceMode::Collisions => matches!(
                    trace.end.terminal,
                    TerminalCause::Collision | TerminalCause::UnavoidableCollisionExcluded
                ),
                TraceMode::All => true,
            };
            Ok((summary, keep.then_some(trace)))
        })
        .collect();
    let mut summaries = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for r in results {
        let (s, t) = r?;
        summaries.push(s);
        traces.extend(t);
    }
    let report = MetricsReport::from_summaries(policy.as_str(), config.episode.ablation, config.seed, &summaries);
    Ok(Evaluation {
        report,
        summaries,
        traces,
    })
}

/// Trains and evaluates one agent per ablation setting. Each agent trains
/// sequentially; the settings run in parallel.
pub fn run_ablation(config: &ExperimentConfig, ablations: &[Ablation]) -> Result<Vec<MetricsReport>> {
    ablations
        .par_iter()
        .map(|&ablation| {
            let mut cfg = config.clone();
            cfg.policy = PolicyKind::Agent;
            cfg.episode.ablation = ablation;
            let trained = run_training(&cfg, |_| ())?;
            Ok(run_evaluation(&cfg, PolicyKind::Agent, Some(&trained.agent))?.report)
        })
        .collect()
}
