//! Spawn placement, the realism filter and action application.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{Action, ActionKind, ACTION_COUNT};
use super::env::{
    CrossingDirection, DistMode, EnvironmentConfig, LaneRel, NpcBehavior, NpcSpec, PedestrianSpec, VehicleColor,
    VehicleSize, VehicleType, MAX_WALKING_SPEED,
};
use crate::error::{Error, Result};
use crate::geometry::{Polyline, Vec2};
use crate::world::road::SIDEWALK_OFFSET;
use crate::world::collision::bounding_radius;
use crate::world::{detect_collision, ActorKind, ActorState, Lane, Participant, RailPlan, RoadNetwork, World};

/// Weights of the distance, size and speed terms of the spawn distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for SpawnWeights {
    fn default() -> Self {
        SpawnWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Lookup values for the spawn-distance terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceTable {
    pub near: f64,
    pub far: f64,
    pub small: f64,
    pub large: f64,
    /// Meters of extra distance per m/s of obstacle speed; 0 gives fixed tables.
    pub speed_coeff: f64,
    /// Near base for oncoming traffic.
    pub opposite_near: f64,
}

impl Default for DistanceTable {
    fn default() -> Self {
        DistanceTable {
            near: 12.0,
            far: 50.0,
            small: 0.0,
            large: 3.0,
            speed_coeff: 0.25,
            opposite_near: 20.0,
        }
    }
}

impl DistanceTable {
    /// Table with the behavior-specific Near override applied.
    pub fn for_behavior(&self, behavior: NpcBehavior) -> DistanceTable {
        match behavior {
            NpcBehavior::DriveOpposite => DistanceTable {
                near: self.opposite_near,
                ..*self
            },
            _ => *self,
        }
    }
}

/// `α·f_d(dist_mode) + β·f_v(size) + γ·f_s(speed)`.
pub fn spawn_distance(
    dist_mode: DistMode,
    size: VehicleSize,
    speed: f64,
    weights: &SpawnWeights,
    table: &DistanceTable,
) -> f64 {
    let f_d = match dist_mode {
        DistMode::Near => table.near,
        DistMode::Far => table.far,
    };
    let f_v = match size {
        VehicleSize::Small => table.small,
        VehicleSize::Large => table.large,
    };
    let f_s = table.speed_coeff * speed.max(0.0);
    weights.alpha * f_d + weights.beta * f_v + weights.gamma * f_s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnConfig {
    pub weights: SpawnWeights,
    pub table: DistanceTable,
    pub pedestrian_distance: f64,
    pub max_npcs: usize,
    pub max_pedestrians: usize,
    pub npc_speed_min: f64,
    pub npc_speed_max: f64,
    pub pedestrian_speed_min: f64,
    /// Seconds the avoidability check simulates ahead.
    pub decel_horizon_s: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        SpawnConfig {
            weights: SpawnWeights::default(),
            table: DistanceTable::default(),
            pedestrian_distance: 40.0,
            max_npcs: 6,
            max_pedestrians: 2,
            npc_speed_min: 10.0,
            npc_speed_max: 20.0,
            pedestrian_speed_min: 1.0,
            decel_horizon_s: 10.0,
        }
    }
}

/// Limits the realism filter checks against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealismBudget {
    /// Ego braking capability in the current conditions, m/s².
    pub max_brake: f64,
    /// Remaining episode time within which a conflict must be possible, s.
    pub horizon_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    RosterFull,
    NoSuchLane,
    OffMap,
    TooSlowToOvertake,
    BelowMinimumDistance,
    NoTrajectoryIntersection,
    Unavoidable,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::RosterFull => "roster full",
            RejectReason::NoSuchLane => "no such lane",
            RejectReason::OffMap => "spawn position off map",
            RejectReason::TooSlowToOvertake => "too slow to overtake",
            RejectReason::BelowMinimumDistance => "below minimum spawn distance",
            RejectReason::NoTrajectoryIntersection => "no trajectory intersection",
            RejectReason::Unavoidable => "collision unavoidable",
        })
    }
}

/// A fully specified actor awaiting the realism check.
#[derive(Clone, Debug, PartialEq)]
pub struct SpawnCandidate {
    pub state: ActorState,
    pub plan: RailPlan,
    /// Minimum allowed distance to the ego at spawn time.
    pub min_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Realism {
    pub reason: Option<RejectReason>,
    /// Constant ego deceleration needed to avoid the candidate, m/s²
    /// (infinite if braking cannot help, NaN if not evaluated).
    pub required_decel: f64,
}

impl Realism {
    pub fn ok(&self) -> bool {
        self.reason.is_none()
    }
}

const SAMPLE_DT: f64 = 0.1;
const DECEL_CEILING: f64 = 60.0;

fn blend(u: f64) -> f64 {
    0.5 * (1.0 - (PI * u.clamp(0.0, 1.0)).cos())
}

/// Follows `from` over `[s_start, s_from]`, eases onto `to` over `length`
/// meters, then follows `to` to its end.
fn transition_path(from: &Polyline, s_start: f64, s_from: f64, to: &Polyline, length: f64) -> Result<Polyline> {
    let mut pts = Vec::new();
    let mut s = s_start;
    while s < s_from {
        pts.push(from.point_at(s));
        s += 1.0;
    }
    let s_to0 = to.project(from.point_at(s_from)).s;
    let n = length.ceil().max(1.0) as usize;
    for i in 0..=n {
        let x = length * i as f64 / n as f64;
        pts.push(from.point_at(s_from + x).lerp(to.point_at(s_to0 + x), blend(x / length)));
    }
    let mut s = s_to0 + length + 1.0;
    while s < to.length() {
        pts.push(to.point_at(s));
        s += 1.0;
    }
    pts.push(to.end());
    Polyline::new(pts)
}

/// Smallest arc length at or beyond `s0` (searching in `dir`) whose point
/// is at least `min_distance` from `from`.
fn place_along(path: &Polyline, s0: f64, from: Vec2, min_distance: f64, dir: f64) -> Option<f64> {
    let mut s = s0;
    while (0.0..=path.length()).contains(&s) {
        if path.point_at(s).distance(from) >= min_distance {
            return Some(s);
        }
        s += 0.5 * dir;
    }
    None
}

/// Whether `p` lies on a lane or on the curb/sidewalk strip flanking the
/// corridor.
pub fn on_map(road: &RoadNetwork, p: Vec2, half_width: f64) -> bool {
    if road.lane_at(p, half_width).is_some() {
        return true;
    }
    let proj = road.corridor.reference.project(p);
    if proj.s <= 0.0 || proj.s >= road.corridor.reference.length() {
        return false;
    }
    let (edge, lat) = if proj.lateral < 0.0 {
        (road.edge_offset(true), -proj.lateral)
    } else {
        (road.edge_offset(false), proj.lateral)
    };
    lat >= edge - 1e-9 && lat <= edge + 2.0 * SIDEWALK_OFFSET
}

fn braking_progress(v0: f64, decel: f64, t: f64) -> (f64, f64) {
    if decel <= 0.0 {
        (v0 * t, v0)
    } else {
        let t_stop = v0 / decel;
        let tt = t.min(t_stop);
        (v0 * tt - 0.5 * decel * tt * tt, (v0 - decel * t).max(0.0))
    }
}

fn ego_along(route: &Polyline, s0: f64, v0: f64, decel: f64, t: f64, ego: &ActorState) -> ActorState {
    let (dist, speed) = braking_progress(v0, decel, t);
    let s = s0 + dist;
    ActorState {
        position: route.point_at(s),
        heading: route.heading_at(s),
        speed,
        ..*ego
    }
}

fn candidate_at(c: &SpawnCandidate, t: f64) -> ActorState {
    let s = c.plan.cruise_speed * t;
    ActorState {
        position: c.plan.path.point_at(s),
        heading: c.plan.path.heading_at(s),
        ..c.state
    }
}

/// Minimal constant deceleration that lets the ego, following `route`,
/// avoid a non-yielding candidate moving along its plan within
/// `horizon_s`. Zero if coasting already avoids it, infinite if nothing does.
pub fn required_deceleration(ego: &ActorState, route: &Polyline, candidate: &SpawnCandidate, horizon_s: f64) -> f64 {
    let s0 = route.project(ego.position).s;
    let steps = (horizon_s / SAMPLE_DT).round() as usize;
    let reach = bounding_radius(ego) + bounding_radius(&candidate.state) + 1e-6;
    let collides = |a: f64| {
        (0..=steps).any(|k| {
            let t = k as f64 * SAMPLE_DT;
            // positions first; headings only matter when the footprints can touch
            let ego_p = route.point_at(s0 + braking_progress(ego.speed, a, t).0);
            let cand_p = candidate.plan.path.point_at(candidate.plan.cruise_speed * t);
            ego_p.distance(cand_p) <= reach
                && detect_collision(&ego_along(route, s0, ego.speed, a, t, ego), &candidate_at(candidate, t))
        })
    };
    if !collides(0.0) {
        return 0.0;
    }
    if collides(DECEL_CEILING) {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, DECEL_CEILING);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if collides(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Whether the candidate's plan enters the ego route ribbon ahead of the
/// ego within `horizon_s`.
fn reaches_route(ego: &ActorState, route: &Polyline, lane_width: f64, c: &SpawnCandidate, horizon_s: f64) -> bool {
    let s_ego = route.project(ego.position).s - ego.half_length;
    let steps = (horizon_s / SAMPLE_DT).ceil() as usize;
    (0..=steps).any(|k| {
        let proj = route.project(c.plan.path.point_at(c.plan.cruise_speed * k as f64 * SAMPLE_DT));
        proj.s >= s_ego && proj.distance <= 0.5 * lane_width + c.state.half_width
    })
}

/// The four-clause realism filter: on map, far enough, able to conflict
/// with the ego, and avoidable by braking.
pub fn validate_realism(
    candidate: &SpawnCandidate,
    ego: &ActorState,
    road: &RoadNetwork,
    budget: &RealismBudget,
    decel_horizon_s: f64,
) -> Realism {
    let reject = |reason| Realism {
        reason: Some(reason),
        required_decel: f64::NAN,
    };
    if !on_map(road, candidate.state.position, candidate.state.half_width) {
        return reject(RejectReason::OffMap);
    }
    if candidate.state.position.distance(ego.position) < candidate.min_distance {
        return reject(RejectReason::BelowMinimumDistance);
    }
    let route = road.route_path();
    let width = road.lane(road.route_lane()).map_or(crate::world::LANE_WIDTH, |l| l.width);
    if !reaches_route(ego, route, width, candidate, budget.horizon_s) {
        return reject(RejectReason::NoTrajectoryIntersection);
    }
    let required_decel = required_deceleration(ego, route, candidate, decel_horizon_s);
    Realism {
        reason: (required_decel > budget.max_brake).then_some(RejectReason::Unavoidable),
        required_decel,
    }
}

/// What a spawned actor looked like when it passed the realism filter.
#[derive(Clone, Debug, PartialEq)]
pub struct SpawnedActor {
    pub participant: Participant,
    pub min_distance: f64,
    pub distance_at_spawn: f64,
    pub required_decel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionOutcome {
    pub env: EnvironmentConfig,
    pub spawned: Vec<SpawnedActor>,
    pub rejection: Option<RejectReason>,
}

fn lane<'a>(road: &'a RoadNetwork, id: Option<crate::world::LaneId>) -> Option<&'a Lane> {
    id.and_then(|id| road.lane(id))
}

struct Placement {
    start: Vec2,
    path: Polyline,
}

fn vehicle_placement(
    behavior: NpcBehavior,
    lane_rel: LaneRel,
    road: &RoadNetwork,
    ego: &ActorState,
    min_distance: f64,
    cruise: f64,
) -> std::result::Result<Placement, RejectReason> {
    let ego_lane = road.lane(road.route_lane()).ok_or(RejectReason::NoSuchLane)?;
    let neighbor = |rel: LaneRel| match rel {
        LaneRel::Current => Some(ego_lane),
        LaneRel::Left => lane(road, ego_lane.left_neighbor),
        LaneRel::Right => lane(road, ego_lane.right_neighbor),
    };
    let ahead_on = |l: &Lane| {
        let s0 = l.centerline.project(ego.position).s;
        place_along(&l.centerline, s0, ego.position, min_distance, 1.0)
            .filter(|&s| s < l.centerline.length() - 10.0)
            .ok_or(RejectReason::OffMap)
    };
    let make = |path: Polyline| Placement { start: path.start(), path };
    let path_err = |_: Error| RejectReason::OffMap;

    match behavior {
        NpcBehavior::DriveAhead => {
            let l = neighbor(lane_rel).ok_or(RejectReason::NoSuchLane)?;
            let s = ahead_on(l)?;
            Ok(make(l.centerline.slice(s, l.centerline.length()).map_err(path_err)?))
        }
        NpcBehavior::Overtake => {
            let (source, pass) = match lane_rel {
                LaneRel::Current => {
                    let pass = lane(road, ego_lane.left_neighbor)
                        .or_else(|| lane(road, ego_lane.right_neighbor))
                        .ok_or(RejectReason::NoSuchLane)?;
                    (ego_lane, pass)
                }
                rel => {
                    let l = neighbor(rel).ok_or(RejectReason::NoSuchLane)?;
                    (l, l)
                }
            };
            let closing = cruise - ego.speed;
            if closing < 1.0 {
                return Err(RejectReason::TooSlowToOvertake);
            }
            let s0 = source.centerline.project(ego.position).s;
            let s_b = place_along(&source.centerline, s0, ego.position, min_distance, -1.0)
                .ok_or(RejectReason::OffMap)?;
            let behind = s0 - s_b;
            let merge_len = (1.2 * cruise).max(15.0);
            // center-to-center lead once the NPC is back in the ego lane
            let lead = 2.0 * ego.half_length + 8.0;
            let travel = cruise * (behind + lead) / closing;
            let base = if source.id == ego_lane.id {
                transition_path(&source.centerline, s_b, s_b, &pass.centerline, merge_len).map_err(path_err)?
            } else {
                source.centerline.slice(s_b, source.centerline.length()).map_err(path_err)?
            };
            if travel + merge_len > base.length() - 10.0 {
                return Err(RejectReason::OffMap);
            }
            let cut = (travel - merge_len).max(if source.id == ego_lane.id { merge_len } else { 0.0 });
            Ok(make(
                transition_path(&base, 0.0, cut, &ego_lane.centerline, merge_len).map_err(path_err)?,
            ))
        }
        NpcBehavior::DriveOpposite => {
            let k = road
                .corridor
                .forward
                .iter()
                .position(|&id| id == ego_lane.id)
                .ok_or(RejectReason::NoSuchLane)?;
            let c = road.corridor.forward.len() - 1 - k;
            let j = match lane_rel {
                LaneRel::Current => Some(c),
                LaneRel::Left => Some(c + 1),
                LaneRel::Right => c.checked_sub(1),
            };
            let opp = j
                .and_then(|j| road.corridor.opposing.get(j))
                .and_then(|&id| road.lane(id))
                .ok_or(RejectReason::NoSuchLane)?;
            let j = j.expect("index resolved above");
            let reference = &road.corridor.reference;
            let s_ref_ego = reference.project(ego.position).s;
            let s0 = opp.centerline.project(ego.position).s;
            let mut s = place_along(&opp.centerline, s0, ego.position, min_distance, -1.0)
                .filter(|&s| s > 10.0)
                .ok_or(RejectReason::OffMap)?;
            let turn = road.cross_street.as_ref().filter(|x| x.s_on_reference > s_ref_ego + 5.0);
            let Some(x) = turn else {
                return Ok(make(opp.centerline.slice(s, opp.centerline.length()).map_err(path_err)?));
            };
            // the turn starts where the NPC reaches the near edge of the cross street
            let s_turn_ref = x.s_on_reference + x.half_width;
            let turn_start = reference.point_at(s_turn_ref) + reference.tangent_at(s_turn_ref).perp() * ((j as f64 + 0.5) * opp.width);
            let s_turn = opp.centerline.project(turn_start).s;
            let lead_in = 15.0;
            s = s.min(s_turn - lead_in);
            if s < 0.0 {
                return Err(RejectReason::OffMap);
            }
            let start = opp.centerline.point_at(s);
            if start.distance(ego.position) < min_distance {
                // the turn point is closer than the spawn distance allows
                return Err(RejectReason::BelowMinimumDistance);
            }
            let radius = x.half_width + 0.5 * opp.width;
            let heading = opp.centerline.heading_at(s_turn);
            let arc = crate::geometry::PathBuilder::new(opp.centerline.point_at(s_turn), heading)
                .arc(radius, PI / 2.0)
                .straight(60.0)
                .build()
                .map_err(path_err)?;
            let approach = opp.centerline.slice(s, s_turn).map_err(path_err)?;
            Ok(make(approach.join(&arc).map_err(path_err)?))
        }
        NpcBehavior::CrossRoad => {
            let (from_line, s_from) = match lane_rel {
                LaneRel::Current => {
                    let curb = road
                        .corridor
                        .reference
                        .offset(-(road.edge_offset(true) + 0.5 * SIDEWALK_OFFSET))
                        .map_err(path_err)?;
                    let s0 = curb.project(ego.position).s;
                    let s = place_along(&curb, s0, ego.position, min_distance, 1.0).ok_or(RejectReason::OffMap)?;
                    (curb, s)
                }
                rel => {
                    let l = neighbor(rel).ok_or(RejectReason::NoSuchLane)?;
                    (l.centerline.clone(), ahead_on(l)?)
                }
            };
            let lateral = from_line.point_at(s_from).distance(ego_lane.centerline.project(from_line.point_at(s_from)).foot);
            let length = (1.5 * lateral).max(8.0);
            if s_from + length > from_line.length() - 10.0 {
                return Err(RejectReason::OffMap);
            }
            Ok(make(
                transition_path(&from_line, s_from, s_from, &ego_lane.centerline, length).map_err(path_err)?,
            ))
        }
        NpcBehavior::LaneChange => {
            let (from, to) = match lane_rel {
                LaneRel::Current => {
                    let to = lane(road, ego_lane.left_neighbor)
                        .or_else(|| lane(road, ego_lane.right_neighbor))
                        .ok_or(RejectReason::NoSuchLane)?;
                    (ego_lane, to)
                }
                rel => (neighbor(rel).ok_or(RejectReason::NoSuchLane)?, ego_lane),
            };
            let s = ahead_on(from)?;
            let delay = cruise * 1.0;
            let length = (2.5 * cruise).max(20.0);
            if s + delay + length > from.centerline.length() - 10.0 {
                return Err(RejectReason::OffMap);
            }
            Ok(make(
                transition_path(&from.centerline, s, s + delay, &to.centerline, length).map_err(path_err)?,
            ))
        }
    }
}

fn pedestrian_placement(
    direction: CrossingDirection,
    road: &RoadNetwork,
    ego: &ActorState,
    min_distance: f64,
) -> std::result::Result<Placement, RejectReason> {
    let reference = &road.corridor.reference;
    let left = road.edge_offset(false) + SIDEWALK_OFFSET;
    let right = road.edge_offset(true) + SIDEWALK_OFFSET;
    let ends = |s: f64| {
        let c = reference.point_at(s);
        let n = reference.tangent_at(s).perp();
        let (a, b) = (c + n * left, c - n * right);
        match direction {
            CrossingDirection::LeftToRight => (a, b),
            CrossingDirection::RightToLeft => (b, a),
        }
    };
    let mut s = reference.project(ego.position).s;
    while ends(s).0.distance(ego.position) < min_distance {
        s += 0.5;
        if s > reference.length() - 5.0 {
            return Err(RejectReason::OffMap);
        }
    }
    let (a, b) = ends(s);
    let path = Polyline::new(vec![a, b]).map_err(|_| RejectReason::OffMap)?;
    Ok(Placement { start: a, path })
}

/// Actions whose effect cannot be rejected up front by roster caps.
pub fn legal_action_mask(env: &EnvironmentConfig, config: &SpawnConfig) -> [bool; ACTION_COUNT] {
    let npc_ok = env.npcs.len() < config.max_npcs;
    let ped_ok = env.pedestrians.len() < config.max_pedestrians;
    let mut mask = [true; ACTION_COUNT];
    for a in super::catalog::enumerate_actions() {
        mask[a.index] = match a.kind {
            ActionKind::SpawnNpc { .. } => npc_ok,
            ActionKind::SpawnPedestrian { .. } => ped_ok,
            _ => true,
        };
    }
    mask
}

/// Applies one action to `env`. Spawn actions build a candidate in `world`
/// (which is not modified), run the realism filter, and return the
/// participant for the caller to insert. Rejected spawns leave `env`
/// unchanged.
pub fn apply_action<R: Rng + ?Sized>(
    env: &EnvironmentConfig,
    action: &Action,
    world: &World,
    config: &SpawnConfig,
    budget: &RealismBudget,
    rng: &mut R,
) -> Result<ActionOutcome> {
    if !world.ego.is_finite() {
        return Err(Error::NumericDomain("ego state is not finite".into()));
    }
    let mut next = env.clone();
    let rejected = |reason| ActionOutcome {
        env: env.clone(),
        spawned: Vec::new(),
        rejection: Some(reason),
    };
    let road = &world.road;
    let ego = &world.ego;
    let id = world.peek_id();

    let (candidate, roster): (SpawnCandidate, Box<dyn FnOnce(&mut EnvironmentConfig)>) = match action.kind {
        ActionKind::SetWeather { phenomenon, level } => {
            next.set_level(phenomenon, level);
            return Ok(ActionOutcome {
                env: next,
                spawned: Vec::new(),
                rejection: None,
            });
        }
        ActionKind::AdvanceTime => {
            next.time_of_day = next.time_of_day.advanced();
            return Ok(ActionOutcome {
                env: next,
                spawned: Vec::new(),
                rejection: None,
            });
        }
        ActionKind::SpawnNpc {
            behavior,
            lane_rel,
            dist_mode,
        } => {
            if env.npcs.len() >= config.max_npcs {
                return Ok(rejected(RejectReason::RosterFull));
            }
            let vehicle_type = VehicleType::ALL[rng.gen_range(0..VehicleType::ALL.len())];
            let color = VehicleColor::ALL[rng.gen_range(0..VehicleColor::ALL.len())];
            let hi = config.npc_speed_max.min(road.speed_limit);
            let lo = config.npc_speed_min.min(hi);
            let mut speed = rng.gen_range(lo..=hi);
            if behavior == NpcBehavior::Overtake {
                speed = speed.max((ego.speed + 3.0).min(hi));
            }
            let size = vehicle_type.size();
            let min_distance = spawn_distance(
                dist_mode,
                size,
                speed,
                &config.weights,
                &config.table.for_behavior(behavior),
            );
            let placement = match vehicle_placement(behavior, lane_rel, road, ego, min_distance, speed) {
                Ok(p) => p,
                Err(reason) => return Ok(rejected(reason)),
            };
            let kind = match size {
                VehicleSize::Small => ActorKind::NpcSmall,
                VehicleSize::Large => ActorKind::NpcLarge,
            };
            let state = ActorState::new(id, kind, placement.start, placement.path.heading_at(0.0), speed).with_lane(road);
            let spec = NpcSpec {
                actor_id: id,
                behavior,
                lane_rel,
                dist_mode,
                size,
                vehicle_type,
                color,
                speed,
            };
            (
                SpawnCandidate {
                    state,
                    plan: RailPlan {
                        path: placement.path,
                        cruise_speed: speed,
                        yields: true,
                    },
                    min_distance,
                },
                Box::new(move |e: &mut EnvironmentConfig| e.npcs.push(spec)),
            )
        }
        ActionKind::SpawnPedestrian { direction } => {
            if env.pedestrians.len() >= config.max_pedestrians {
                return Ok(rejected(RejectReason::RosterFull));
            }
            let lo = config.pedestrian_speed_min.clamp(f64::MIN_POSITIVE, MAX_WALKING_SPEED);
            let speed = rng.gen_range(lo..=MAX_WALKING_SPEED);
            let min_distance = config.pedestrian_distance;
            let placement = match pedestrian_placement(direction, road, ego, min_distance) {
                Ok(p) => p,
                Err(reason) => return Ok(rejected(reason)),
            };
            let state = ActorState::new(
                id,
                ActorKind::Pedestrian,
                placement.start,
                placement.path.heading_at(0.0),
                speed,
            )
            .with_lane(road);
            let spec = PedestrianSpec {
                actor_id: id,
                crossing_direction: direction,
                speed,
                spawn_distance_ahead: min_distance,
            };
            (
                SpawnCandidate {
                    state,
                    plan: RailPlan {
                        path: placement.path,
                        cruise_speed: speed,
                        yields: false,
                    },
                    min_distance,
                },
                Box::new(move |e: &mut EnvironmentConfig| e.pedestrians.push(spec)),
            )
        }
    };

    if !candidate.state.is_finite() {
        return Err(Error::NumericDomain(format!("spawn candidate {id} is not finite")));
    }
    let verdict = validate_realism(&candidate, ego, road, budget, config.decel_horizon_s);
    if let Some(reason) = verdict.reason {
        return Ok(rejected(reason));
    }
    roster(&mut next);
    let distance_at_spawn = candidate.state.position.distance(ego.position);
    Ok(ActionOutcome {
        env: next,
        spawned: vec![SpawnedActor {
            participant: Participant::new(candidate.state, candidate.plan, world.tick),
            min_distance: candidate.min_distance,
            distance_at_spawn,
            required_decel: verdict.required_decel,
        }],
        rejection: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::catalog::{action, enumerate_actions};
    use crate::actions::env::{legal_time_successors, Level, TimeOfDay, WeatherPhenomenon};
    use crate::world::{build_road, ActorId, Control, LayoutId, VehicleLimits, TICK_DT};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world_at(layout: LayoutId, s: f64, speed: f64) -> World {
        let road = build_road(layout);
        let route = road.route_path().clone();
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, route.point_at(s), route.heading_at(s), speed)
            .with_lane(&road);
        World::new(road, ego)
    }

    fn budget() -> RealismBudget {
        RealismBudget {
            max_brake: 6.0,
            horizon_s: 12.0,
        }
    }

    #[test]
    fn distance_table_examples() {
        let w = SpawnWeights::default();
        let fixed = DistanceTable {
            speed_coeff: 0.0,
            ..DistanceTable::default()
        };
        assert_eq!(spawn_distance(DistMode::Near, VehicleSize::Small, 15.0, &w, &fixed), 12.0);
        assert_eq!(spawn_distance(DistMode::Near, VehicleSize::Large, 15.0, &w, &fixed), 15.0);
        let t = DistanceTable::default();
        assert_eq!(spawn_distance(DistMode::Far, VehicleSize::Large, 16.0, &w, &t), 57.0);
        assert_eq!(t.for_behavior(NpcBehavior::DriveOpposite).near, 20.0);
    }

    #[test]
    fn weather_and_time_actions() {
        let world = world_at(LayoutId::LShapedJunction, 10.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let env = EnvironmentConfig::default();
        let rain_high = enumerate_actions()
            .into_iter()
            .find(|a| {
                a.kind
                    == ActionKind::SetWeather {
                        phenomenon: WeatherPhenomenon::Rain,
                        level: Level::High,
                    }
            })
            .unwrap();
        let out = apply_action(&env, &rain_high, &world, &SpawnConfig::default(), &budget(), &mut rng).unwrap();
        assert_eq!(
            out.env,
            EnvironmentConfig {
                rain: Level::High,
                ..env.clone()
            }
        );
        let out = apply_action(&env, &action(12).unwrap(), &world, &SpawnConfig::default(), &budget(), &mut rng).unwrap();
        assert_eq!(out.env.time_of_day, TimeOfDay::Noon);
    }

    #[test]
    fn too_close_candidate_is_rejected() {
        let world = world_at(LayoutId::MultiLaneCrossroad, 50.0, 15.0);
        let road = &world.road;
        let route = road.route_path();
        let pos = route.point_at(52.0);
        let state = ActorState::new(ActorId(1), ActorKind::NpcSmall, pos, 0.0, 15.0).with_lane(road);
        let cand = SpawnCandidate {
            state,
            plan: RailPlan {
                path: route.slice(52.0, route.length()).unwrap(),
                cruise_speed: 15.0,
                yields: true,
            },
            min_distance: 12.0,
        };
        let v = validate_realism(&cand, &world.ego, road, &budget(), 10.0);
        assert_eq!(v.reason, Some(RejectReason::BelowMinimumDistance));
        assert_eq!(v.reason.unwrap().to_string(), "below minimum spawn distance");
    }

    #[test]
    fn parallel_oncoming_traffic_is_rejected() {
        // no cross street on this layout, so oncoming traffic stays in its lanes
        let world = world_at(LayoutId::LShapedJunction, 20.0, 12.0);
        let env = EnvironmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Action {
            index: 13 + 12,
            kind: ActionKind::SpawnNpc {
                behavior: NpcBehavior::DriveOpposite,
                lane_rel: LaneRel::Current,
                dist_mode: DistMode::Near,
            },
        };
        assert_eq!(a, action(25).unwrap());
        let out = apply_action(&env, &a, &world, &SpawnConfig::default(), &budget(), &mut rng).unwrap();
        assert_eq!(out.rejection, Some(RejectReason::NoTrajectoryIntersection));
        assert_eq!(out.env, env);
    }

    #[test]
    fn crossing_candidate_the_ego_can_stop_for_is_accepted() {
        let world = world_at(LayoutId::MultiLaneCrossroad, 20.0, 10.0);
        let road = &world.road;
        let route = road.route_path();
        let conflict = route.point_at(80.0);
        let start = conflict + Vec2::new(0.0, -30.0);
        let path = Polyline::new(vec![start, conflict + Vec2::new(0.0, 30.0)]).unwrap();
        let state = ActorState::new(ActorId(1), ActorKind::NpcSmall, start, path.heading_at(0.0), 10.0);
        let cand = SpawnCandidate {
            state,
            plan: RailPlan {
                path,
                cruise_speed: 10.0,
                yields: true,
            },
            min_distance: 12.0,
        };
        // the crosser starts south of the carriageway on open ground
        assert!(!on_map(road, start, state.half_width));
        let cand = SpawnCandidate {
            state: ActorState {
                position: conflict + Vec2::new(0.0, -7.0),
                ..cand.state
            },
            plan: RailPlan {
                path: Polyline::new(vec![conflict + Vec2::new(0.0, -7.0), conflict + Vec2::new(0.0, 30.0)]).unwrap(),
                ..cand.plan
            },
            ..cand
        };
        let v = validate_realism(&cand, &world.ego, road, &budget(), 10.0);
        assert!(v.ok(), "{:?}", v);
        assert!(v.required_decel >= 0.0 && v.required_decel <= 6.0);
    }

    #[test]
    fn required_decel_oracle_for_stationary_obstacle() {
        // ego at 10 m/s, obstacle ahead with a 20 m bumper gap: a = v²/2g = 2.5
        let world = world_at(LayoutId::MultiLaneCrossroad, 50.0, 10.0);
        let road = &world.road;
        let route = road.route_path();
        let ego = world.ego;
        let s_ob = 50.0 + 2.0 * ego.half_length + 20.0;
        let state = ActorState::new(ActorId(1), ActorKind::NpcSmall, route.point_at(s_ob), 0.0, 0.0);
        let cand = SpawnCandidate {
            state,
            plan: RailPlan {
                path: route.slice(s_ob, s_ob + 1.0).unwrap(),
                cruise_speed: 0.0,
                yields: true,
            },
            min_distance: 12.0,
        };
        let a = required_deceleration(&ego, route, &cand, 10.0);
        assert!((a - 2.5).abs() < 0.05, "{a}");
    }

    #[test]
    fn spawns_respect_distance_on_every_layout() {
        for layout in LayoutId::ALL {
            let world = world_at(layout, 15.0, 8.0);
            let mut accepted = 0;
            for (i, a) in enumerate_actions().into_iter().filter(|a| a.index >= 13).enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let env = EnvironmentConfig::default();
                let out = apply_action(&env, &a, &world, &SpawnConfig::default(), &budget(), &mut rng).unwrap();
                for s in &out.spawned {
                    accepted += 1;
                    assert!(s.distance_at_spawn >= s.min_distance);
                    assert!(s.required_decel <= 6.0);
                    assert!(on_map(&world.road, s.participant.state.position, s.participant.state.half_width));
                }
                assert!(out.env.check(6, 2, world.road.speed_limit).is_ok());
            }
            assert!(accepted >= 8, "{layout}: only {accepted} spawns accepted");
        }
    }

    #[test]
    fn roster_cap_rejects_and_masks() {
        let world = world_at(LayoutId::MultiLaneCrossroad, 15.0, 8.0);
        let config = SpawnConfig {
            max_npcs: 0,
            ..SpawnConfig::default()
        };
        let env = EnvironmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply_action(&env, &action(13).unwrap(), &world, &config, &budget(), &mut rng).unwrap();
        assert_eq!(out.rejection, Some(RejectReason::RosterFull));
        let mask = legal_action_mask(&env, &config);
        assert!(mask[..13].iter().all(|&m| m));
        assert!(mask[13..43].iter().all(|&m| !m));
        assert!(mask[43] && mask[44]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_sequences_keep_invariants(
            seed in any::<u64>(),
            layout in 0usize..4,
            actions in proptest::collection::vec(0usize..ACTION_COUNT, 1..50),
        ) {
            let mut world = world_at(LayoutId::ALL[layout], 10.0, 10.0);
            let mut env = EnvironmentConfig::default();
            let config = SpawnConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let limits = VehicleLimits::default();
            for idx in actions {
                let before = env.time_of_day;
                let out = apply_action(&env, &action(idx).unwrap(), &world, &config, &budget(), &mut rng).unwrap();
                prop_assert!(legal_time_successors(before).contains(&out.env.time_of_day));
                prop_assert!(out.env.check(config.max_npcs, config.max_pedestrians, world.road.speed_limit).is_ok());
                for s in out.spawned {
                    prop_assert!(s.distance_at_spawn >= s.min_distance);
                    world.add(s.participant);
                }
                env = out.env;
                for _ in 0..10 {
                    world.step(Control::COAST, &limits, TICK_DT).unwrap();
                }
                let alive: Vec<ActorId> = world.participants.iter().map(|p| p.state.id).collect();
                env.retain_alive(|id| alive.contains(&id));
            }
        }
    }

    #[test]
    fn spawn_distance_monotone() {
        let w = SpawnWeights::default();
        let t = DistanceTable::default();
        for size in [VehicleSize::Small, VehicleSize::Large] {
            let mut prev = 0.0;
            for k in 0..40 {
                let d = spawn_distance(DistMode::Near, size, k as f64 * 0.5, &w, &t);
                assert!(d >= prev);
                prev = d;
                assert!(spawn_distance(DistMode::Far, size, k as f64, &w, &t) > spawn_distance(DistMode::Near, size, k as f64, &w, &t));
            }
        }
        assert!(spawn_distance(DistMode::Near, VehicleSize::Large, 5.0, &w, &t) > spawn_distance(DistMode::Near, VehicleSize::Small, 5.0, &w, &t));
    }
}
