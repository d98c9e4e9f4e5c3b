use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actions::EnvironmentConfig;
use crate::ads::InternalState;
use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;
use crate::world::LANE_WIDTH;

/// Length of the encoded state.
pub const STATE_DIM: usize = 19;
/// Slots holding external (environment) variables.
pub const EXTERNAL_SLOTS: std::ops::Range<usize> = 0..7;
/// Slots holding the driving stack's internal variables.
pub const INTERNAL_SLOTS: std::ops::Range<usize> = 7..19;

/// Normalization constants for the internal slots.
pub const SPEED_SCALE: f64 = 30.0;
pub const ACCEL_MIN: f64 = -6.0;
pub const ACCEL_MAX: f64 = 3.0;
pub const CONTROL_ERROR_SCALE: f64 = 5.0;

/// The 19-slot state: 7 externals followed by 12 internals, all in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn values(&self) -> &[f64; STATE_DIM] {
        &self.0
    }

    pub fn to_scalars<T: Real>(&self) -> Vec<T> {
        self.0.iter().map(|&v| T::lit(v)).collect()
    }

    pub fn ablate(mut self, ablation: Ablation) -> Self {
        let zeroed = match ablation {
            Ablation::Full => return self,
            Ablation::ExternalOnly => INTERNAL_SLOTS,
            Ablation::InternalOnly => EXTERNAL_SLOTS,
        };
        for i in zeroed {
            self.0[i] = 0.0;
        }
        self
    }
}

/// Which part of the state the agent is allowed to see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    ExternalOnly,
    InternalOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::ExternalOnly, Ablation::InternalOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::ExternalOnly => "external_only",
            Ablation::InternalOnly => "internal_only",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Ablation::Full),
            "external_only" | "external" => Ok(Ablation::ExternalOnly),
            "internal_only" | "internal" => Ok(Ablation::InternalOnly),
            other => Err(Error::Invalid(format!("unknown ablation '{other}'"))),
        }
    }
}

/// Roster caps used to normalize actor counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RosterCaps {
    pub npcs: usize,
    pub pedestrians: usize,
}

impl Default for RosterCaps {
    fn default() -> Self {
        RosterCaps { npcs: 6, pedestrians: 2 }
    }
}

fn unit(x: f64) -> f64 {
    crate::scalar::clamp(x, 0.0, 1.0)
}

fn ratio(n: usize, cap: usize) -> f64 {
    if cap == 0 {
        0.0
    } else {
        unit(n as f64 / cap as f64)
    }
}

/// Encodes environment and internal state into the 19-slot vector.
/// `nearest_distance` is the distance to the closest other actor (`None`
/// when there is none) and `losd` the ego's current longitudinal safety
/// distance.
pub fn encode_state(
    env: &EnvironmentConfig,
    internal: &InternalState,
    nearest_distance: Option<f64>,
    losd: f64,
    caps: RosterCaps,
) -> Result<StateVector> {
    ensure_finite("internal state", &internal.to_array())?;
    ensure_finite("losd", &[losd])?;
    if let Some(d) = nearest_distance {
        ensure_finite("nearest distance", &[d])?;
    }
    let proximity = match nearest_distance {
        None => 1.0,
        Some(_) if losd <= 0.0 => 1.0,
        Some(d) => unit(d / (2.0 * losd)),
    };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(StateVector([
        f64::from(env.time_of_day.ordinal()) / 2.0,
        f64::from(env.rain.ordinal()) / 3.0,
        f64::from(env.fog.ordinal()) / 3.0,
        f64::from(env.wetness.ordinal()) / 3.0,
        ratio(env.npcs.len(), caps.npcs),
        ratio(env.pedestrians.len(), caps.pedestrians),
        proximity,
        unit(internal.speed / SPEED_SCALE),
        unit((internal.acceleration - ACCEL_MIN) / (ACCEL_MAX - ACCEL_MIN)),
        unit(internal.heading_error.abs() / std::f64::consts::PI),
        unit(internal.throttle),
        unit(internal.brake),
        unit((internal.steer + 1.0) / 2.0),
        unit(internal.lane_offset / (2.0 * LANE_WIDTH) + 0.5),
        unit(internal.route_progress),
        flag(internal.localization_ok),
        unit(internal.perception_range_frac),
        flag(internal.plan_feasible),
        unit(internal.control_error / CONTROL_ERROR_SCALE),
    ]))
}

/// Collision reward `r_col` at `proc == 1`, `proc` itself when strictly
/// between 0.2 and 1, and -1 otherwise.
pub fn reward<T: Real>(proc: T, r_col: T) -> Result<T> {
    if !(proc >= T::zero() && proc <= T::one()) {
        return Err(Error::NumericDomain(format!("proc {proc} outside [0, 1]")));
    }
    if !(r_col > T::one()) || !r_col.is_finite() {
        return Err(Error::NumericDomain(format!("r_col {r_col} must exceed 1")));
    }
    Ok(if proc == T::one() {
        r_col
    } else if proc > T::lit(0.2) {
        proc
    } else {
        -T::one()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::Level;

    fn nominal() -> InternalState {
        InternalState {
            localization_ok: true,
            plan_feasible: true,
            perception_range_frac: 1.0,
            ..InternalState::default()
        }
    }

    #[test]
    fn all_defaults() {
        let s = encode_state(&EnvironmentConfig::default(), &nominal(), None, 5.0, RosterCaps::default()).unwrap();
        assert_eq!(&s.0[..7], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.0[7], 0.0);
        assert_eq!(s.0.len(), 19);
    }

    #[test]
    fn rain_high_fills_slot() {
        let env = EnvironmentConfig {
            rain: Level::High,
            ..EnvironmentConfig::default()
        };
        let s = encode_state(&env, &nominal(), Some(3.0), 5.0, RosterCaps::default()).unwrap();
        assert_eq!(s.0[1], 1.0);
        assert!((s.0[6] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_rejected() {
        let bad = InternalState {
            speed: f64::NAN,
            ..nominal()
        };
        assert!(encode_state(&EnvironmentConfig::default(), &bad, None, 5.0, RosterCaps::default()).is_err());
    }

    #[test]
    fn ablations_zero_their_slots() {
        let s = StateVector([0.5; STATE_DIM]);
        let e = s.ablate(Ablation::ExternalOnly);
        assert!(e.0[..7].iter().all(|&v| v == 0.5) && e.0[7..].iter().all(|&v| v == 0.0));
        let i = s.ablate(Ablation::InternalOnly);
        assert!(i.0[..7].iter().all(|&v| v == 0.0) && i.0[7..].iter().all(|&v| v == 0.5));
        assert_eq!(s.ablate(Ablation::Full), s);
        assert_eq!("internal-only".parse::<Ablation>().unwrap(), Ablation::InternalOnly);
    }

    #[test]
    fn reward_branches() {
        assert_eq!(reward(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(reward(0.5, 2.0).unwrap(), 0.5);
        assert_eq!(reward(0.2, 2.0).unwrap(), -1.0);
        assert_eq!(reward(0.0f32, 2.0).unwrap(), -1.0);
        assert!(reward(1.1, 2.0).is_err());
        assert!(reward(f64::NAN, 2.0).is_err());
    }
}
