//! The stepping world: ego plus scripted traffic participants.
//!
//! Non-ego actors follow precomputed paths ("rails"). Vehicles slow down for
//! anything in their forward corridor; pedestrians walk blindly at constant
//! speed. Actors that reach the end of their path leave the world.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polyline;
use crate::world::actor::{step_actor, ActorId, ActorState, Control, VehicleLimits};
use crate::world::collision::detect_collision;
use crate::world::road::RoadNetwork;

/// Deceleration NPC vehicles use when yielding, m/s².
pub const NPC_BRAKE: f64 = 6.0;
/// Acceleration NPC vehicles use to regain cruise speed, m/s².
pub const NPC_ACCEL: f64 = 3.0;

/// A scripted actor's plan: follow `path` at `cruise_speed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RailPlan {
    pub path: Polyline,
    pub cruise_speed: f64,
    /// Vehicles yield to obstacles ahead; pedestrians do not.
    pub yields: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Participant {
    pub state: ActorState,
    pub plan: RailPlan,
    /// Arc length travelled along the plan path.
    pub progress: f64,
    /// Tick at which the actor entered the world.
    pub spawn_tick: u64,
}

impl Participant {
    pub fn new(state: ActorState, plan: RailPlan, spawn_tick: u64) -> Self {
        Participant {
            state,
            plan,
            progress: 0.0,
            spawn_tick,
        }
    }

    pub fn finished(&self) -> bool {
        self.progress >= self.plan.path.length() - 1e-9
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub road: RoadNetwork,
    pub ego: ActorState,
    pub participants: Vec<Participant>,
    pub tick: u64,
    next_id: u32,
}

/// Who the ego hit this tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub other: ActorId,
    pub tick: u64,
}

impl World {
    pub fn new(road: RoadNetwork, ego: ActorState) -> Self {
        World {
            road,
            ego,
            participants: Vec::new(),
            tick: 0,
            next_id: 1,
        }
    }

    pub fn allocate_id(&mut self) -> ActorId {
        let id = ActorId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Id the next spawned actor will receive.
    pub fn peek_id(&self) -> ActorId {
        ActorId(self.next_id)
    }

    pub fn add(&mut self, participant: Participant) {
        self.next_id = self.next_id.max(participant.state.id.0 + 1);
        self.participants.push(participant);
    }

    pub fn others(&self) -> Vec<ActorState> {
        self.participants.iter().map(|p| p.state).collect()
    }

    pub fn participant(&self, id: ActorId) -> Option<&Participant> {
        self.participants.iter().find(|p| p.state.id == id)
    }

    /// Advances every actor by `dt`: the ego under `control`, the rest along
    /// their rails. Returns ids of actors that left the world.
    pub fn step(&mut self, control: Control, limits: &VehicleLimits, dt: f64) -> Result<Vec<ActorId>> {
        let next_ego = step_actor(&self.ego, control, dt, limits, &self.road)?;
        let snapshot: Vec<ActorState> = std::iter::once(self.ego)
            .chain(self.participants.iter().map(|p| p.state))
            .collect();
        for p in &mut self.participants {
            advance_rail(p, &snapshot, dt, &self.road)?;
        }
        self.ego = next_ego;
        self.tick += 1;
        let mut gone = Vec::new();
        self.participants.retain(|p| {
            let keep = !p.finished();
            if !keep {
                gone.push(p.state.id);
            }
            keep
        });
        Ok(gone)
    }

    /// Actors currently overlapping the ego footprint, lowest id first.
    pub fn ego_contacts(&self) -> Vec<Contact> {
        let mut hits: Vec<Contact> = self
            .participants
            .iter()
            .filter(|p| detect_collision(&self.ego, &p.state))
            .map(|p| Contact {
                other: p.state.id,
                tick: self.tick,
            })
            .collect();
        hits.sort_by_key(|c| c.other);
        hits
    }
}

/// Longitudinal gap to the nearest actor inside `me`'s forward corridor.
fn corridor_gap(me: &ActorState, others: &[ActorState], lookahead: f64) -> Option<f64> {
    let f = me.direction();
    others
        .iter()
        .filter(|o| o.id != me.id)
        .filter_map(|o| {
            let d = o.position - me.position;
            let ahead = d.dot(f);
            let lateral = d.cross(f).abs();
            let reach = me.half_width + o.half_width + 0.3;
            let of = o.direction();
            let extent = o.half_length * of.dot(f).abs() + o.half_width * of.cross(f).abs();
            (ahead > 0.0 && ahead < lookahead && lateral < reach).then(|| ahead - me.half_length - extent)
        })
        .min_by(f64::total_cmp)
}

fn advance_rail(p: &mut Participant, snapshot: &[ActorState], dt: f64, road: &RoadNetwork) -> Result<()> {
    let me = p.state;
    let v = me.speed;
    let mut target_accel = if v < p.plan.cruise_speed {
        NPC_ACCEL.min((p.plan.cruise_speed - v) / dt)
    } else {
        ((p.plan.cruise_speed - v) / dt).max(-NPC_BRAKE)
    };
    if p.plan.yields {
        let safe = v * v / (2.0 * NPC_BRAKE) + 5.0;
        if let Some(gap) = corridor_gap(&me, snapshot, safe + 30.0) {
            if gap < safe {
                target_accel = -NPC_BRAKE;
            }
        }
    }
    let speed = (v + target_accel * dt).max(0.0);
    p.progress = (p.progress + 0.5 * (v + speed) * dt).min(p.plan.path.length());
    let position = p.plan.path.point_at(p.progress);
    let heading = p.plan.path.heading_at(p.progress);
    if !position.is_finite() || !heading.is_finite() {
        return Err(Error::NumericDomain(format!("actor {} left the numeric domain", me.id)));
    }
    p.state = ActorState {
        position,
        heading,
        speed,
        acceleration: (speed - v) / dt,
        ..me
    }
    .with_lane(road);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::world::actor::{ActorKind, TICK_DT};
    use crate::world::road::{build_road, LayoutId};

    fn world_with_leader(gap: f64, leader_speed: f64) -> World {
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let path = road.route_path().clone();
        let ego_s = path.project(road.origin).s;
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, road.origin, 0.0, 0.0).with_lane(&road);
        let mut w = World::new(road, ego);
        let id = w.allocate_id();
        let rail = path.slice(ego_s + gap, path.length()).unwrap();
        let st = ActorState::new(id, ActorKind::NpcSmall, rail.start(), rail.heading_at(0.0), leader_speed);
        w.add(Participant::new(
            st,
            RailPlan {
                path: rail,
                cruise_speed: leader_speed,
                yields: true,
            },
            0,
        ));
        w
    }

    #[test]
    fn rail_actor_moves_along_path() {
        let mut w = world_with_leader(30.0, 10.0);
        let before = w.participants[0].state.position;
        w.step(Control::COAST, &VehicleLimits::default(), TICK_DT).unwrap();
        let after = w.participants[0].state.position;
        assert!((after.distance(before) - 1.0).abs() < 1e-9);
        assert_eq!(w.tick, 1);
    }

    #[test]
    fn npc_yields_to_stopped_vehicle() {
        // NPC behind a stationary ego in the same lane must stop short of it
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let path = road.route_path().clone();
        let ego_pos = path.point_at(100.0);
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, ego_pos, 0.0, 0.0).with_lane(&road);
        let mut w = World::new(road, ego);
        let rail = path.slice(40.0, path.length()).unwrap();
        let st = ActorState::new(ActorId(1), ActorKind::NpcSmall, rail.start(), 0.0, 12.0);
        w.add(Participant::new(st, RailPlan { path: rail, cruise_speed: 12.0, yields: true }, 0));
        for _ in 0..200 {
            w.step(Control::full_brake(0.0), &VehicleLimits::default(), TICK_DT).unwrap();
            assert!(w.ego_contacts().is_empty(), "npc rear-ended the ego at tick {}", w.tick);
        }
        assert!(w.participants[0].state.speed < 1e-9);
    }

    #[test]
    fn finished_actors_are_removed() {
        let mut w = world_with_leader(30.0, 15.0);
        let len = w.participants[0].plan.path.length();
        let mut gone = Vec::new();
        for _ in 0..((len / 1.5) as usize + 20) {
            gone.extend(w.step(Control::COAST, &VehicleLimits::default(), TICK_DT).unwrap());
        }
        assert_eq!(gone, vec![ActorId(1)]);
        assert!(w.participants.is_empty());
    }

    #[test]
    fn contact_reported_on_overlap() {
        let mut w = world_with_leader(30.0, 0.0);
        w.participants[0].state.position = w.ego.position + Vec2::new(1.0, 0.0);
        assert_eq!(w.ego_contacts().len(), 1);
    }
}
