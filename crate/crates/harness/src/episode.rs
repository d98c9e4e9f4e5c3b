//! One scenario-generation episode: the policy picks environment actions,
//! the driving stack reacts for one observation period after each, and the
//! window-maximum collision probability becomes the reward.

use critgen_core::actions::{self, apply_action, legal_action_mask, required_deceleration, RealismBudget, SpawnCandidate};
use critgen_core::ads::RuleBasedAds;
use critgen_core::agent::{encode_state, reward, RosterCaps, StateVector, Transition};
use critgen_core::safety::{collision_probability, current_distance, losd, time_to_collision, ProcBreakdown};
use critgen_core::world::{build_road, ActorId, ActorKind, ActorState, LayoutId, Participant, RailPlan, World, TICK_DT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::EpisodeSettings;
use crate::error::{HarnessError, Result};
use crate::policy::Policy;
use crate::trace::{
    CollisionRecord, EndRecord, EpisodeTrace, Fixture, FixtureEvent, SpawnAudit, StepRecord, TerminalCause,
    TickRecord, TraceHeader, TRACE_FORMAT, TRACE_VERSION,
};

/// The ego counts as arrived within this distance of the destination, m.
pub const ARRIVAL_RADIUS: f64 = 3.0;

/// Runs one episode. Simulator numeric failures end the episode with
/// [`TerminalCause::NumericFailure`]; policy and configuration errors are
/// returned as `Err`.
pub fn run_episode(
    settings: &EpisodeSettings,
    layout: LayoutId,
    seed: u64,
    policy: &mut dyn Policy,
    fixtures: &[FixtureEvent],
) -> Result<EpisodeTrace> {
    settings.validate()?;
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        seed,
        layout,
        policy: policy.name().to_string(),
        settings: settings.clone(),
        fixtures: fixtures.to_vec(),
    };
    let mut run = Runner::new(settings, layout, seed)?;
    let mut steps = Vec::new();
    let outcome = run.play(policy, fixtures, &mut steps);
    let total_reward = steps.iter().map(|s| s.reward).sum();
    let end = match outcome {
        Ok((terminal, collision)) => EndRecord {
            terminal,
            steps: steps.len(),
            ticks: run.world.tick,
            ttc: collision
                .filter(|c| c.counted)
                .and_then(|c| time_to_collision(Some(c.tick), TICK_DT)),
            collision,
            total_reward,
            message: None,
        },
        Err(HarnessError::Numeric(m)) => EndRecord {
            terminal: TerminalCause::NumericFailure,
            steps: steps.len(),
            ticks: run.world.tick,
            collision: None,
            ttc: None,
            total_reward,
            message: Some(m),
        },
        Err(e) => return Err(e),
    };
    Ok(EpisodeTrace { header, steps, end })
}

struct Runner<'a> {
    settings: &'a EpisodeSettings,
    world: World,
    ads: RuleBasedAds,
    env: actions::EnvironmentConfig,
    rng: ChaCha8Rng,
    audits: Vec<SpawnAudit>,
}

impl<'a> Runner<'a> {
    fn new(settings: &'a EpisodeSettings, layout: LayoutId, seed: u64) -> Result<Self> {
        let road = build_road(layout);
        let route = road.route_path().clone();
        let s0 = route.project(road.origin).s;
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, road.origin, route.heading_at(s0), 0.0).with_lane(&road);
        Ok(Runner {
            settings,
            world: World::new(road, ego),
            ads: RuleBasedAds::new(settings.ads.clone(), route),
            env: actions::EnvironmentConfig::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            audits: Vec::new(),
        })
    }

    fn caps(&self) -> RosterCaps {
        RosterCaps {
            npcs: self.settings.spawn.max_npcs,
            pedestrians: self.settings.spawn.max_pedestrians,
        }
    }

    fn state(&self) -> Result<StateVector> {
        let ego = &self.world.ego;
        let key = |a: &ActorState| [a.position.x, a.position.y, 0.0];
        let nearest = self
            .world
            .participants
            .iter()
            .map(|p| current_distance(key(ego), key(&p.state)))
            .reduce(f64::min);
        let l = losd(ego.speed, 0.0, &self.settings.safety)?;
        Ok(encode_state(&self.env, &self.ads.internal_state(), nearest, l, self.caps())?)
    }

    fn max_brake(&self) -> f64 {
        self.settings.ads.effective_vehicle(&self.env).max_brake
    }

    fn snapshot(&self, proc: f64) -> TickRecord {
        let mut actors = vec![self.world.ego];
        actors.extend(self.world.participants.iter().map(|p| p.state));
        actors[1..].sort_by_key(|a| a.id);
        TickRecord {
            tick: self.world.tick,
            proc,
            actors,
        }
    }

    fn inject(&mut self, fixture: Fixture) -> Result<SpawnAudit> {
        let Fixture::RearWedge { gap } = fixture;
        let route = self.ads.route().clone();
        let ego = self.world.ego;
        let kind = ActorKind::NpcSmall;
        let (half_length, _) = kind.footprint();
        let s = route.project(ego.position).s + ego.half_length + gap + half_length;
        let id = self.world.peek_id();
        let state = ActorState::new(id, kind, route.point_at(s), route.heading_at(s), 0.0).with_lane(&self.world.road);
        let plan = RailPlan {
            path: route.slice(s, (s + 10.0).min(route.length()))?,
            cruise_speed: 0.0,
            yields: true,
        };
        let candidate = SpawnCandidate {
            state,
            plan: plan.clone(),
            min_distance: 0.0,
        };
        let required = required_deceleration(&ego, &route, &candidate, self.settings.spawn.decel_horizon_s);
        self.world.add(Participant::new(state, plan.clone(), self.world.tick));
        Ok(SpawnAudit {
            actor: id,
            tick: self.world.tick,
            injected: true,
            ego,
            state,
            plan,
            min_distance: 0.0,
            distance: ego.position.distance(state.position),
            required_decel: required,
            max_brake: self.max_brake(),
        })
    }

    /// Re-derives the avoidability of a spawn from its audit record alone.
    fn audit_collision(&self, other: ActorId, tick: u64, step: usize) -> CollisionRecord {
        match self.audits.iter().find(|a| a.actor == other) {
            Some(a) => {
                let candidate = SpawnCandidate {
                    state: a.state,
                    plan: a.plan.clone(),
                    min_distance: a.min_distance,
                };
                let required =
                    required_deceleration(&a.ego, self.ads.route(), &candidate, self.settings.spawn.decel_horizon_s);
                CollisionRecord {
                    other,
                    tick,
                    step,
                    audit_required_decel: required,
                    max_brake_at_spawn: a.max_brake,
                    counted: required <= a.max_brake + 1e-9,
                }
            }
            None => CollisionRecord {
                other,
                tick,
                step,
                audit_required_decel: f64::INFINITY,
                max_brake_at_spawn: 0.0,
                counted: false,
            },
        }
    }

    fn play(
        &mut self,
        policy: &mut dyn Policy,
        fixtures: &[FixtureEvent],
        steps: &mut Vec<StepRecord>,
    ) -> Result<(TerminalCause, Option<CollisionRecord>)> {
        let s = self.settings;
        let ticks_per_action = s.ticks_per_action();
        let destination = self.world.road.destination;
        let mut state = self.state()?;
        for step in 0..s.max_actions {
            let mask = legal_action_mask(&self.env, &s.spawn);
            let index = policy.choose(&state.ablate(s.ablation), &mask, step)?;
            let action = actions::action(index)
                .ok_or_else(|| HarnessError::Validation(format!("action index {index} out of range")))?;
            let budget = RealismBudget {
                max_brake: self.max_brake(),
                horizon_s: (s.max_actions - step) as f64 * s.otp_seconds,
            };
            let ego_at_spawn = self.world.ego;
            let outcome = apply_action(&self.env, &action, &self.world, &s.spawn, &budget, &mut self.rng)?;
            self.env = outcome.env;
            let mut spawned = Vec::new();
            for a in outcome.spawned {
                let audit = SpawnAudit {
                    actor: a.participant.state.id,
                    tick: self.world.tick,
                    injected: false,
                    ego: ego_at_spawn,
                    state: a.participant.state,
                    plan: a.participant.plan.clone(),
                    min_distance: a.min_distance,
                    distance: a.distance_at_spawn,
                    required_decel: a.required_decel,
                    max_brake: budget.max_brake,
                };
                self.world.add(a.participant);
                spawned.push(audit);
            }
            for f in fixtures.iter().filter(|f| f.step == step) {
                spawned.push(self.inject(f.fixture)?);
            }
            self.audits.extend(spawned.iter().cloned());

            let mut window = ProcBreakdown::default();
            let mut ticks = Vec::with_capacity(ticks_per_action);
            let mut contact = None;
            let mut arrived = false;
            for _ in 0..ticks_per_action {
                let control = self.ads.tick(&self.world, &self.env, &mut self.rng)?;
                let limits = self.settings.ads.effective_vehicle(&self.env);
                self.world.step(control, &limits, TICK_DT)?;
                let world = &self.world;
                self.env.retain_alive(|id| world.participant(id).is_some());
                let hit = self.world.ego_contacts().first().copied();
                let others = self.world.others();
                let breakdown = collision_probability(
                    &self.world.ego,
                    &others,
                    &self.world.road,
                    &s.safety,
                    hit.map(|c| c.other),
                )?;
                if !breakdown.proc.is_finite() {
                    return Err(HarnessError::Numeric(format!("proc is {}", breakdown.proc)));
                }
                if ticks.is_empty() || breakdown.proc > window.proc {
                    window = breakdown;
                }
                ticks.push(self.snapshot(breakdown.proc));
                if let Some(c) = hit {
                    contact = Some(c);
                    break;
                }
                if self.world.ego.position.distance(destination) <= ARRIVAL_RADIUS {
                    arrived = true;
                    break;
                }
            }

            let r = reward(window.proc, s.r_col)?;
            let next_state = self.state()?;
            let done = contact.is_some() || arrived || step + 1 == s.max_actions;
            policy.observe(Transition {
                s: state.ablate(s.ablation).to_scalars(),
                a: index,
                r,
                s_next: next_state.ablate(s.ablation).to_scalars(),
                done,
            })?;
            steps.push(StepRecord {
                step,
                action: index,
                rejection: outcome.rejection,
                env: self.env.clone(),
                state,
                next_state,
                proc: window,
                reward: r,
                done,
                spawned,
                ticks,
            });
            if let Some(c) = contact {
                let record = self.audit_collision(c.other, c.tick, step);
                let cause = if record.counted {
                    TerminalCause::Collision
                } else {
                    TerminalCause::UnavoidableCollisionExcluded
                };
                return Ok((cause, Some(record)));
            }
            if arrived {
                return Ok((TerminalCause::DestinationReached, None));
            }
            state = next_state;
        }
        Ok((TerminalCause::ActionBudgetExhausted, None))
    }
}
