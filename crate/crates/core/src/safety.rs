//! Safety distances and collision probability.
//!
//! The scalar formulas are generic over [`Real`]; the actor-level wrappers
//! work on simulator state in `f64`.
//!
//! * longitudinal safety distance, reaction time omitted:
//!   `LoSD = ½ (v_f²/α_f − v_l²/α_l) + R_min`, floored at `R_min`
//! * lateral safety distance, in the simplified form `v² sin β / α_ego`
//! * per-obstacle risk `(SD − CD) / SD` clamped to `[0, 1]`, longitudinal
//!   for same-lane obstacles and lateral otherwise
//! * `ProC = max + (1 − max) · min` over the worst longitudinal and lateral
//!   risks

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Vec2};
use crate::scalar::{clamp, Real};
use crate::world::{ActorId, ActorState, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams<T> {
    /// Follower deceleration magnitude, m/s².
    pub alpha_f: T,
    /// Leader deceleration magnitude, m/s².
    pub alpha_l: T,
    /// Ego deceleration magnitude used for the lateral distance, m/s².
    pub alpha_ego: T,
    /// Minimum allowable gap, m.
    pub r_min: T,
}

impl<T: Real> Default for SafetyParams<T> {
    fn default() -> Self {
        SafetyParams {
            alpha_f: T::lit(6.0),
            alpha_l: T::lit(6.0),
            alpha_ego: T::lit(6.0),
            r_min: T::lit(5.0),
        }
    }
}

impl<T: Real> SafetyParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.alpha_f, self.alpha_l, self.alpha_ego]
            .iter()
            .all(|a| a.is_finite() && *a > T::zero())
            && self.r_min.is_finite()
            && self.r_min >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::NumericDomain(
                "decelerations must be positive and r_min non-negative".into(),
            ))
        }
    }
}

/// Longitudinal safety distance between a follower at `v_f` and a leader at
/// `v_l`, never below `r_min`.
pub fn losd<T: Real>(v_f: T, v_l: T, p: &SafetyParams<T>) -> Result<T> {
    if !(v_f >= T::zero()) || !(v_l >= T::zero()) || !v_f.is_finite() || !v_l.is_finite() {
        return Err(Error::NumericDomain(format!(
            "speeds must be finite and non-negative (v_f={v_f}, v_l={v_l})"
        )));
    }
    let half = T::lit(0.5);
    let raw = half * (v_f * v_f / p.alpha_f - v_l * v_l / p.alpha_l) + p.r_min;
    Ok(raw.max(p.r_min))
}

/// Lateral safety distance for an ego at `v_ego` whose heading makes angle
/// `beta` (radians, `[0, π]`) with the obstacle's lane.
pub fn lasd<T: Real>(v_ego: T, beta: T, p: &SafetyParams<T>) -> T {
    v_ego * v_ego * beta.sin().abs() / p.alpha_ego
}

/// Euclidean distance between two 3D points.
pub fn current_distance<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `(SD − CD) / SD` clamped to `[0, 1]`; zero when `SD` is zero.
pub fn distance_risk<T: Real>(safety_distance: T, cd: T) -> T {
    if safety_distance <= T::zero() {
        return T::zero();
    }
    clamp((safety_distance - cd) / safety_distance, T::zero(), T::one())
}

/// Combines the worst longitudinal and lateral risks.
pub fn combine_proc<T: Real>(lo: T, la: T) -> T {
    let hi = lo.max(la);
    let low = lo.min(la);
    hi + (T::one() - hi) * low
}

/// How an obstacle relates to the ego's lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneRelation {
    pub same_lane: bool,
    /// Heading of the obstacle's lane at the obstacle (its own heading when
    /// it is off every lane).
    pub lane_heading: f64,
}

/// Answers same-lane / lane-direction queries for the risk computation.
pub trait LaneOracle {
    fn relation(&self, ego: &ActorState, obstacle: &ActorState) -> LaneRelation;
}

impl LaneOracle for RoadNetwork {
    fn relation(&self, ego: &ActorState, obstacle: &ActorState) -> LaneRelation {
        let same_lane = ego.lane_id.is_some() && ego.lane_id == obstacle.lane_id;
        let lane_heading = obstacle
            .lane_id
            .and_then(|id| self.lane(id))
            .map(|lane| {
                let s = lane.centerline.project(obstacle.position).s;
                lane.centerline.heading_at(s)
            })
            .unwrap_or(obstacle.heading);
        LaneRelation {
            same_lane,
            lane_heading,
        }
    }
}

fn xyz(p: Vec2) -> [f64; 3] {
    // planar world: elevation is constant zero
    [p.x, p.y, 0.0]
}

/// Longitudinal and lateral risk the ego faces from one obstacle.
/// Exactly one component can be nonzero.
pub fn per_obstacle_proc(
    ego: &ActorState,
    ob: &ActorState,
    relation: LaneRelation,
    params: &SafetyParams<f64>,
) -> Result<(f64, f64)> {
    let cd = current_distance(xyz(ego.position), xyz(ob.position));
    if relation.same_lane {
        let ob_ahead = (ob.position - ego.position).dot(ego.direction()) >= 0.0;
        let (v_f, v_l) = if ob_ahead {
            (ego.speed, ob.speed)
        } else {
            (ob.speed, ego.speed)
        };
        let sd = losd(v_f, v_l, params)?;
        Ok((distance_risk(sd, cd), 0.0))
    } else {
        let beta = angle_between(ego.heading, relation.lane_heading);
        let sd = lasd(ego.speed, beta, params);
        Ok((0.0, distance_risk(sd, cd)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcBreakdown {
    pub lo_proc: f64,
    pub la_proc: f64,
    pub proc: f64,
    pub argmax_obstacle_lo: Option<ActorId>,
    pub argmax_obstacle_la: Option<ActorId>,
}

/// Collision probability of the ego against every obstacle. When
/// `contact` names an obstacle the ego is touching, that obstacle's
/// component is set to 1 so `proc` is exactly 1.
pub fn collision_probability(
    ego: &ActorState,
    obstacles: &[ActorState],
    oracle: &impl LaneOracle,
    params: &SafetyParams<f64>,
    contact: Option<ActorId>,
) -> Result<ProcBreakdown> {
    let mut out = ProcBreakdown::default();
    for ob in obstacles {
        let relation = oracle.relation(ego, ob);
        let (mut lo, mut la) = per_obstacle_proc(ego, ob, relation, params)?;
        if contact == Some(ob.id) {
            if relation.same_lane {
                lo = 1.0;
            } else {
                la = 1.0;
            }
        }
        if lo > out.lo_proc || (lo > 0.0 && out.argmax_obstacle_lo.is_none()) {
            out.lo_proc = lo;
            out.argmax_obstacle_lo = Some(ob.id);
        }
        if la > out.la_proc || (la > 0.0 && out.argmax_obstacle_la.is_none()) {
            out.la_proc = la;
            out.argmax_obstacle_la = Some(ob.id);
        }
    }
    out.proc = combine_proc(out.lo_proc, out.la_proc);
    Ok(out)
}

/// Seconds from episode start to the first counted collision tick.
pub fn time_to_collision(collision_tick: Option<u64>, dt: f64) -> Option<f64> {
    collision_tick.map(|t| t as f64 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ActorKind, LaneId};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p() -> SafetyParams<f64> {
        SafetyParams::default()
    }

    #[test]
    fn losd_examples() {
        assert_eq!(losd(10.0, 10.0, &p()).unwrap(), 5.0);
        assert_eq!(losd(20.0, 10.0, &p()).unwrap(), 30.0);
        assert_eq!(losd(0.0, 20.0, &p()).unwrap(), 5.0);
        assert!(matches!(losd(-1.0, 0.0, &p()), Err(Error::NumericDomain(_))));
        assert!(losd(1.0, f64::NAN, &p()).is_err());
    }

    #[test]
    fn losd_in_f32() {
        let q = SafetyParams::<f32>::default();
        assert_eq!(losd(20.0f32, 10.0, &q).unwrap(), 30.0);
    }

    #[test]
    fn lasd_examples() {
        assert!((lasd(12.0, 30f64.to_radians(), &p()) - 12.0).abs() < 1e-12);
        assert!((lasd(12.0, FRAC_PI_2, &p()) - 24.0).abs() < 1e-12);
        assert_eq!(lasd(12.0, 0.0, &p()), 0.0);
        assert!((lasd(9.0, 0.3, &p()) - lasd(9.0, PI - 0.3, &p())).abs() < 1e-12);
    }

    #[test]
    fn current_distance_examples() {
        assert_eq!(current_distance([0.0, 0.0, 0.0], [3.0, 4.0, 0.0]), 5.0);
        assert_eq!(current_distance([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]), 0.0);
        assert_eq!(current_distance([1.0, 2.0, 2.0], [0.0, 0.0, 0.0]), 3.0);
    }

    #[test]
    fn combine_examples() {
        assert!((combine_proc(0.5f64, 0.2) - 0.6).abs() < 1e-15);
        assert_eq!(combine_proc(0.0, 0.0), 0.0);
        assert_eq!(combine_proc(1.0, 0.3), 1.0);
    }

    fn actor(id: u32, x: f64, heading: f64, speed: f64, lane: u32) -> ActorState {
        ActorState {
            lane_id: Some(LaneId(lane)),
            ..ActorState::new(ActorId(id), ActorKind::NpcSmall, Vec2::new(x, 0.0), heading, speed)
        }
    }

    struct ByLaneId;
    impl LaneOracle for ByLaneId {
        fn relation(&self, ego: &ActorState, ob: &ActorState) -> LaneRelation {
            LaneRelation {
                same_lane: ego.lane_id == ob.lane_id,
                lane_heading: ob.heading,
            }
        }
    }

    #[test]
    fn per_obstacle_same_lane_half_risk() {
        // follower 20, leader 10 -> LoSD 30; CD 15 -> 0.5
        let ego = actor(0, 0.0, 0.0, 20.0, 1);
        let ob = actor(1, 15.0, 0.0, 10.0, 1);
        let rel = ByLaneId.relation(&ego, &ob);
        assert_eq!(per_obstacle_proc(&ego, &ob, rel, &p()).unwrap(), (0.5, 0.0));
        let far = actor(2, 45.0, 0.0, 10.0, 1);
        assert_eq!(per_obstacle_proc(&ego, &far, rel, &p()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn different_lane_has_no_longitudinal_risk() {
        let ego = actor(0, 0.0, 0.0, 20.0, 1);
        let ob = actor(1, 1.0, FRAC_PI_2, 10.0, 2);
        let rel = ByLaneId.relation(&ego, &ob);
        let (lo, la) = per_obstacle_proc(&ego, &ob, rel, &p()).unwrap();
        assert_eq!(lo, 0.0);
        assert!(la > 0.9);
        // parallel lane: beta = 0 -> LaSD = 0 -> no lateral risk
        let parallel = actor(2, 1.0, 0.0, 10.0, 2);
        let rel = ByLaneId.relation(&ego, &parallel);
        assert_eq!(per_obstacle_proc(&ego, &parallel, rel, &p()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn contact_forces_unit_proc() {
        let ego = actor(0, 0.0, 0.0, 0.0, 1);
        let ob = actor(3, 2.0, 0.0, 0.0, 1);
        let b = collision_probability(&ego, &[ob], &ByLaneId, &p(), Some(ActorId(3))).unwrap();
        assert_eq!(b.proc, 1.0);
        assert_eq!(b.lo_proc, 1.0);
        assert_eq!(b.argmax_obstacle_lo, Some(ActorId(3)));
    }

    #[test]
    fn empty_obstacles_give_zero() {
        let ego = actor(0, 0.0, 0.0, 10.0, 1);
        let b = collision_probability(&ego, &[], &ByLaneId, &p(), None).unwrap();
        assert_eq!(b, ProcBreakdown::default());
    }

    #[test]
    fn ttc_examples() {
        assert!((time_to_collision(Some(230), 0.1).unwrap() - 23.0).abs() < 1e-12);
        assert_eq!(time_to_collision(Some(0), 0.1), Some(0.0));
        assert_eq!(time_to_collision(None, 0.1), None);
    }
}
