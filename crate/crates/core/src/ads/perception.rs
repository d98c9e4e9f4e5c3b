use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{EnvironmentConfig, Level, TimeOfDay};
use crate::world::ActorState;

/// Weather and daylight degradation of a range sensor.
///
/// Rain and fog shrink the sensing range; the detection probability is
/// scaled by the same factor. Wetness leaves perception alone and instead
/// reduces braking grip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionModel {
    /// meters
    pub base_sensor_range: f64,
    pub detection_probability_clear: f64,
    /// Range multiplier for rain at Light, Moderate, High.
    pub rain: [f64; 3],
    pub fog: [f64; 3],
    /// Braking multiplier for wetness at Light, Moderate, High.
    pub wetness_braking: [f64; 3],
    pub night_multiplier: f64,
}

impl Default for PerceptionModel {
    fn default() -> Self {
        PerceptionModel {
            base_sensor_range: 60.0,
            detection_probability_clear: 1.0,
            rain: [0.9, 0.75, 0.6],
            fog: [0.8, 0.6, 0.4],
            wetness_braking: [0.95, 0.9, 0.8],
            night_multiplier: 0.7,
        }
    }
}

fn level_factor(table: &[f64; 3], level: Level) -> f64 {
    match level {
        Level::None => 1.0,
        Level::Light => table[0],
        Level::Moderate => table[1],
        Level::High => table[2],
    }
}

impl PerceptionModel {
    /// Product of every range multiplier in effect.
    pub fn range_multiplier(&self, env: &EnvironmentConfig) -> f64 {
        let night = if env.time_of_day == TimeOfDay::Night {
            self.night_multiplier
        } else {
            1.0
        };
        level_factor(&self.rain, env.rain) * level_factor(&self.fog, env.fog) * night
    }

    pub fn effective_range(&self, env: &EnvironmentConfig) -> f64 {
        self.base_sensor_range * self.range_multiplier(env)
    }

    pub fn detection_probability(&self, env: &EnvironmentConfig) -> f64 {
        self.detection_probability_clear * self.range_multiplier(env)
    }

    pub fn braking_multiplier(&self, env: &EnvironmentConfig) -> f64 {
        level_factor(&self.wetness_braking, env.wetness)
    }

    pub fn is_valid(&self) -> bool {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        self.base_sensor_range > 0.0
            && (0.0..=1.0).contains(&self.detection_probability_clear)
            && self.rain.iter().chain(&self.fog).chain(&self.wetness_braking).all(|&m| unit(m))
            && unit(self.night_multiplier)
    }

    /// Actors the ego detects this tick.
    ///
    /// One uniform draw is consumed per actor, in order, whether or not the
    /// actor is in range, so milder conditions never perceive less under the
    /// same seed.
    pub fn sense<R: Rng + ?Sized>(
        &self,
        others: &[ActorState],
        env: &EnvironmentConfig,
        ego: &ActorState,
        rng: &mut R,
    ) -> Vec<ActorState> {
        let range = self.effective_range(env);
        let p = self.detection_probability(env);
        others
            .iter()
            .filter(|o| {
                let u: f64 = rng.gen();
                ego.position.distance(o.position) <= range && u < p
            })
            .copied()
            .collect()
    }
}
