use serde::{Deserialize, Serialize};

use super::SimError;
use crate::game::DEFAULT_CRASH_PENALTY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Ring,
    Open,
}

/// Which TV class, if any, misreports its value of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UntruthfulMode {
    None,
    HighDeclaresLow,
    LowDeclaresHigh,
}

/// Initial vehicle count, either explicit or from a per-lane density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    /// Vehicles per km per lane.
    Density(f64),
    Count(u32),
}

/// Equilibrium speed source for the time-difference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VeSource {
    /// Trailing per-class mean speed over `ve_window` steps.
    Trailing,
    /// Density (veh/km/lane) to speed (km/h) lookup, linearly interpolated.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Metres.
    pub cell_length: f64,
    pub n_cells: u32,
    /// Seconds per step.
    pub dt: f64,
    /// Cells per step.
    pub v_max: u32,
    pub a_pos: u32,
    pub a_neg: i32,
    pub n_lanes: u32,
    pub p_sd: f64,
    /// Lane-change completion time, seconds.
    pub ta: f64,
    pub boundary: Boundary,
    /// Open boundary: per-lane injection probability per step.
    pub inflow_rate: f64,
    pub tv_penetration: f64,
    /// Dollars per hour.
    pub vot_high: f64,
    pub vot_low: f64,
    /// Fraction of TVs in the high-VOT class.
    pub high_low_ratio: f64,
    pub untruthful_mode: UntruthfulMode,
    pub seed: u64,
    pub ve_window: u32,
    pub ve_source: VeSource,
    pub population: Population,
    /// Total steps of a run, warm-up included.
    pub steps: u64,
    pub warmup: u64,
    pub crash_penalty: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cell_length: 7.5,
            n_cells: 2700,
            dt: 1.0,
            v_max: 5,
            a_pos: 1,
            a_neg: -1,
            n_lanes: 2,
            p_sd: 1.0 / 3.0,
            ta: 3.0,
            boundary: Boundary::Ring,
            inflow_rate: 0.3,
            tv_penetration: 1.0,
            vot_high: 25.0,
            vot_low: 10.0,
            high_low_ratio: 0.2,
            untruthful_mode: UntruthfulMode::None,
            seed: 1,
            ve_window: 60,
            ve_source: VeSource::Trailing,
            population: Population::Density(40.0),
            steps: 3600,
            warmup: 600,
            crash_penalty: DEFAULT_CRASH_PENALTY,
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        key,
        reason: reason.into(),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |key, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(key, format!("{x} is outside [0, 1]")))
            }
        };
        if !(self.cell_length > 0.0 && self.cell_length.is_finite()) {
            return Err(invalid("cell_length", "must be positive"));
        }
        if self.n_cells < 2 {
            return Err(invalid("n_cells", "need at least two cells"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if self.v_max < 1 {
            return Err(invalid("v_max", "must be at least 1"));
        }
        if self.a_pos < 1 {
            return Err(invalid("a_pos", "must be at least 1"));
        }
        if self.a_neg >= 0 {
            return Err(invalid("a_neg", "must be negative"));
        }
        if self.n_lanes != 2 {
            return Err(invalid("n_lanes", "only two lanes are modelled"));
        }
        unit("p_sd", self.p_sd)?;
        if !(self.ta > 0.0 && self.ta.is_finite()) {
            return Err(invalid("ta", "must be positive"));
        }
        unit("inflow_rate", self.inflow_rate)?;
        unit("tv_penetration", self.tv_penetration)?;
        unit("high_low_ratio", self.high_low_ratio)?;
        for (key, v) in [("vot_high", self.vot_high), ("vot_low", self.vot_low)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(key, "must be a nonnegative rate"));
            }
        }
        if self.ve_window < 1 {
            return Err(invalid("ve_window", "must be at least 1"));
        }
        if let VeSource::Table(t) = &self.ve_source {
            if t.is_empty() {
                return Err(invalid("ve_table", "table is empty"));
            }
            if t.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(invalid("ve_table", "densities must be strictly increasing"));
            }
        }
        match self.population {
            Population::Density(d) if !(d >= 0.0 && d.is_finite()) => {
                return Err(invalid("density", "must be nonnegative"));
            }
            _ => {}
        }
        if self.initial_vehicles() > self.capacity() {
            return Err(invalid("population", "more vehicles than cells"));
        }
        if self.warmup > self.steps {
            return Err(invalid("warmup", "warm-up longer than the run"));
        }
        if !(self.crash_penalty > 0.0 && self.crash_penalty.is_finite()) {
            return Err(invalid("crash_penalty", "must be positive"));
        }
        Ok(())
    }

    pub fn capacity(&self) -> u32 {
        self.n_cells * self.n_lanes
    }

    pub fn road_km(&self) -> f64 {
        self.n_cells as f64 * self.cell_length / 1000.0
    }

    /// One vehicle per cell, per lane.
    pub fn jam_density(&self) -> f64 {
        1000.0 / self.cell_length
    }

    pub fn initial_vehicles(&self) -> u32 {
        match self.population {
            Population::Count(n) => n,
            Population::Density(d) => (d * self.road_km() * self.n_lanes as f64).round() as u32,
        }
    }

    /// Per-lane density of the initial population, veh/km.
    pub fn density(&self) -> f64 {
        match self.population {
            Population::Density(d) => d,
            Population::Count(n) => n as f64 / (self.road_km() * self.n_lanes as f64),
        }
    }

    /// cells/step → m/s
    pub fn speed_ms(&self, cells: u32) -> f64 {
        cells as f64 * self.cell_length / self.dt
    }

    /// cells/step → km/h
    pub fn kmh_per_cell_step(&self) -> f64 {
        self.cell_length / self.dt * 3.6
    }

    /// Positive acceleration in m/s².
    pub fn accel_pos_ms2(&self) -> f64 {
        self.a_pos as f64 * self.cell_length / (self.dt * self.dt)
    }

    /// Negative acceleration in m/s².
    pub fn accel_neg_ms2(&self) -> f64 {
        self.a_neg as f64 * self.cell_length / (self.dt * self.dt)
    }
}
