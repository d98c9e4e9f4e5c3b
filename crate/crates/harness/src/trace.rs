//! Episode traces and their JSON-lines encoding.
//!
//! A trace file holds one JSON object per line: a `header`, one `step` per
//! action, and a final `end` record.

use std::fmt;
use std::io::{BufRead, Write};

use critgen_core::actions::{EnvironmentConfig, RejectReason};
use critgen_core::agent::StateVector;
use critgen_core::safety::ProcBreakdown;
use critgen_core::world::{ActorId, ActorState, LayoutId, RailPlan};
use serde::{Deserialize, Serialize};

use crate::config::EpisodeSettings;
use crate::error::{HarnessError, Result};

pub const TRACE_FORMAT: &str = "critgen-trace";
pub const TRACE_VERSION: u32 = 1;

/// Encodes `+inf` as the string `"inf"` (JSON has no infinities).
mod maybe_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

/// Actor injected outside the action space for testing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixture {
    /// A stopped car placed `gap` meters ahead of the ego's front bumper.
    RearWedge { gap: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEvent {
    /// Injected right after the action of this step is applied.
    pub step: usize,
    pub fixture: Fixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub layout: LayoutId,
    pub policy: String,
    pub settings: EpisodeSettings,
    #[serde(default)]
    pub fixtures: Vec<FixtureEvent>,
}

/// Everything needed to re-check a spawn after the fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnAudit {
    pub actor: ActorId,
    pub tick: u64,
    /// True for fixtures that bypassed the realism filter.
    pub injected: bool,
    pub ego: ActorState,
    pub state: ActorState,
    pub plan: RailPlan,
    pub min_distance: f64,
    pub distance: f64,
    #[serde(with = "maybe_inf")]
    pub required_decel: f64,
    /// Usable ego braking when the actor appeared, m/s².
    pub max_brake: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub proc: f64,
    /// Ego first, then the other actors in id order.
    pub actors: Vec<ActorState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: usize,
    pub rejection: Option<RejectReason>,
    /// Environment after the action.
    pub env: EnvironmentConfig,
    /// Full (unablated) state the action was chosen in.
    pub state: StateVector,
    pub next_state: StateVector,
    /// Breakdown at the tick where the window maximum occurred.
    pub proc: ProcBreakdown,
    pub reward: f64,
    pub done: bool,
    pub spawned: Vec<SpawnAudit>,
    pub ticks: Vec<TickRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCause {
    Collision,
    /// The ego hit an actor it could not have avoided at spawn time.
    UnavoidableCollisionExcluded,
    DestinationReached,
    ActionBudgetExhausted,
    NumericFailure,
}

impl fmt::Display for TerminalCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalCause::Collision => "collision",
            TerminalCause::UnavoidableCollisionExcluded => "unavoidable_collision_excluded",
            TerminalCause::DestinationReached => "destination_reached",
            TerminalCause::ActionBudgetExhausted => "action_budget_exhausted",
            TerminalCause::NumericFailure => "numeric_failure",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub other: ActorId,
    pub tick: u64,
    pub step: usize,
    /// Deceleration recomputed from the stored spawn audit.
    #[serde(with = "maybe_inf")]
    pub audit_required_decel: f64,
    pub max_brake_at_spawn: f64,
    pub counted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub terminal: TerminalCause,
    pub steps: usize,
    pub ticks: u64,
    pub collision: Option<CollisionRecord>,
    /// Seconds to the counted collision.
    pub ttc: Option<f64>,
    pub total_reward: f64,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(TraceHeader),
    Step(StepRecord),
    End(EndRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub end: EndRecord,
}

impl EpisodeTrace {
    pub fn counted_collision(&self) -> bool {
        self.end.terminal == TerminalCause::Collision
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |rec: &TraceRecord| -> Result<()> {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&TraceRecord::Header(self.header.clone()))?;
        for s in &self.steps {
            line(&TraceRecord::Step(s.clone()))?;
        }
        line(&TraceRecord::End(self.end.clone()))?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a trace, reporting the 1-based line of the first problem.
    pub fn read_jsonl<B: BufRead>(r: B) -> Result<Self> {
        let schema = |line: usize, message: String| HarnessError::Schema { line, message };
        let mut header = None;
        let mut steps = Vec::new();
        let mut end = None;
        let mut last_line = 0;
        for (i, text) in r.lines().enumerate() {
            let n = i + 1;
            last_line = n;
            let text = text?;
            if text.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord = serde_json::from_str(&text).map_err(|e| schema(n, e.to_string()))?;
            if end.is_some() {
                return Err(schema(n, "record after end".into()));
            }
            match rec {
                TraceRecord::Header(h) => {
                    if header.is_some() || !steps.is_empty() {
                        return Err(schema(n, "header must be the first record".into()));
                    }
                    if h.format != TRACE_FORMAT {
                        return Err(schema(n, format!("unknown format '{}'", h.format)));
                    }
                    if h.version != TRACE_VERSION {
                        return Err(schema(n, format!("unsupported version {}", h.version)));
                    }
                    header = Some(h);
                }
                TraceRecord::Step(s) => {
                    if header.is_none() {
                        return Err(schema(n, "step before header".into()));
                    }
                    if s.step != steps.len() {
                        return Err(schema(n, format!("expected step {}, found {}", steps.len(), s.step)));
                    }
                    steps.push(s);
                }
                TraceRecord::End(e) => {
                    if header.is_none() {
                        return Err(schema(n, "end before header".into()));
                    }
                    end = Some(e);
                }
            }
        }
        let header = header.ok_or_else(|| schema(1, "missing header".into()))?;
        let end = end.ok_or_else(|| schema(last_line + 1, "missing end record (truncated trace?)".into()))?;
        Ok(EpisodeTrace { header, steps, end })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }
}
