use serde::{Deserialize, Serialize};

use super::GameError;

/// Speeds and rates describing one vehicle's two possible equilibration
/// episodes. Accelerations carry their physical sign: `a1` is the rate that
/// takes `v1` to `v_e` (negative when decelerating), `a2` takes `v2` to `v_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedScenario {
    /// Speed at the decision instant. Informational; it cancels out.
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub v_e: f64,
    pub ta: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SpeedScenario {
    /// Single-rate form: decelerate from `v1` and accelerate from `v2` at
    /// the same magnitude `a`.
    pub fn symmetric(v1: f64, v2: f64, v_e: f64, ta: f64, a: f64) -> Self {
        SpeedScenario {
            v0: v2,
            v1,
            v2,
            v_e,
            ta,
            a1: -a,
            a2: a,
        }
    }

    /// Builds a scenario from speeds in km/h; rates stay in m/s².
    pub fn from_kmh(v1: f64, v2: f64, v_e: f64, ta: f64, a1: f64, a2: f64) -> Self {
        let k = 1.0 / 3.6;
        SpeedScenario {
            v0: v2 * k,
            v1: v1 * k,
            v2: v2 * k,
            v_e: v_e * k,
            ta,
            a1,
            a2,
        }
    }

    fn validate(&self) -> Result<(), GameError> {
        let all = [self.v0, self.v1, self.v2, self.v_e, self.ta, self.a1, self.a2];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(GameError::NonFinite("speed scenario"));
        }
        if self.v_e <= 0.0 {
            return Err(GameError::NonPositiveEquilibriumSpeed(self.v_e));
        }
        if self.ta <= 0.0 {
            return Err(GameError::NonPositiveManeuverTime(self.ta));
        }
        if self.a1 == 0.0 {
            return Err(GameError::ZeroAcceleration("a1"));
        }
        if self.a2 == 0.0 {
            return Err(GameError::ZeroAcceleration("a2"));
        }
        if self.v1 < self.v2 {
            return Err(GameError::SpeedOrder {
                v1: self.v1,
                v2: self.v2,
            });
        }
        Ok(())
    }

    /// Extra distance covered during the ramp to the chosen speed.
    pub fn ramp_gain(&self) -> f64 {
        0.5 * (self.v1 - self.v2) * self.ta
    }

    /// Distance the high-speed trajectory covers above `v_e` while relaxing.
    pub fn high_relaxation_gain(&self) -> f64 {
        let dv = self.v_e - self.v1;
        dv * dv / (-2.0 * self.a1)
    }

    /// Distance the low-speed trajectory covers below `v_e` while relaxing.
    pub fn low_relaxation_gain(&self) -> f64 {
        let dv = self.v_e - self.v2;
        dv * dv / (2.0 * self.a2)
    }

    /// Total distance gained by the high-speed choice.
    pub fn distance_gain(&self) -> f64 {
        self.ramp_gain() + self.high_relaxation_gain() + self.low_relaxation_gain()
    }
}

/// Average travel time saved by choosing `v1` over `v2`: the distance gained
/// over the equilibration episode divided by the equilibrium speed.
pub fn time_difference(s: &SpeedScenario) -> Result<f64, GameError> {
    s.validate()?;
    let td = s.distance_gain() / s.v_e;
    if td < 0.0 {
        return Err(GameError::NegativeTimeDifference(td));
    }
    Ok(td)
}
