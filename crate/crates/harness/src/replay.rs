//! Re-simulates a recorded episode and locates the first divergence.

use std::fmt;

use crate::episode::run_episode;
use crate::error::Result;
use crate::policy::ScriptedPolicy;
use crate::trace::{EpisodeTrace, StepRecord};

/// Where a replay first disagreed with its recording.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: usize,
    /// Simulation tick, when the disagreement is inside the tick array.
    pub tick: Option<u64>,
    pub field: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "diverged at step {}", self.step)?;
        if let Some(t) = self.tick {
            write!(f, ", tick {t}")?;
        }
        write!(f, " ({})", self.field)
    }
}

pub struct ReplayReport {
    pub replayed: EpisodeTrace,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn verdict(&self) -> String {
        match &self.divergence {
            None => "identical".to_string(),
            Some(d) => d.to_string(),
        }
    }
}

/// Replays the trace's seed, settings, fixtures and action sequence.
pub fn replay(recorded: &EpisodeTrace) -> Result<ReplayReport> {
    let h = &recorded.header;
    let mut policy = ScriptedPolicy::new(recorded.actions(), 0);
    let mut replayed = run_episode(&h.settings, h.layout, h.seed, &mut policy, &h.fixtures)?;
    replayed.header.policy = h.policy.clone();
    let divergence = first_divergence(recorded, &replayed);
    Ok(ReplayReport { replayed, divergence })
}

fn step_divergence(a: &StepRecord, b: &StepRecord) -> Option<Divergence> {
    let at = |field: &str| {
        Some(Divergence {
            step: a.step,
            tick: None,
            field: field.to_string(),
        })
    };
    if a.action != b.action {
        return at("action");
    }
    if a.rejection != b.rejection {
        return at("rejection");
    }
    if a.spawned != b.spawned {
        return at("spawned");
    }
    for (ta, tb) in a.ticks.iter().zip(&b.ticks) {
        if ta != tb {
            return Some(Divergence {
                step: a.step,
                tick: Some(ta.tick),
                field: "tick state".into(),
            });
        }
    }
    if a.ticks.len() != b.ticks.len() {
        return at("tick count");
    }
    if a.env != b.env {
        return at("env");
    }
    if a.state != b.state || a.next_state != b.next_state {
        return at("state");
    }
    if a.proc != b.proc {
        return at("proc");
    }
    if a.reward != b.reward || a.done != b.done {
        return at("reward");
    }
    None
}

/// First disagreement between two traces of the same episode.
pub fn first_divergence(recorded: &EpisodeTrace, replayed: &EpisodeTrace) -> Option<Divergence> {
    for (a, b) in recorded.steps.iter().zip(&replayed.steps) {
        if let Some(d) = step_divergence(a, b) {
            return Some(d);
        }
    }
    let n = recorded.steps.len().min(replayed.steps.len());
    if recorded.steps.len() != replayed.steps.len() {
        return Some(Divergence {
            step: n,
            tick: None,
            field: "step count".into(),
        });
    }
    if recorded.end != replayed.end {
        return Some(Divergence {
            step: n,
            tick: None,
            field: "end record".into(),
        });
    }
    None
}
