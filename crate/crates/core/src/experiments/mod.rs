//! Scenario presets and the sweep runner built on the simulator.

mod studies;
mod sweep;

pub use studies::{
    calibrate, isotonic_nonincreasing, run_shockwave, run_vip, CalibrationTable, ShockwaveMap, VipRow,
    LOW_SPEED_THRESHOLD,
};
pub use sweep::{run_point, run_sweep, summarize, AveragedClass, AveragedPoint, ClassSummary, PointRun, RunSummary, SweepResult};

use serde::{Deserialize, Serialize};

use crate::sim::{Boundary, SimConfig, SimError, UntruthfulMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    BenefitHeatmap,
    UntruthfulHigh,
    UntruthfulLow,
    Vip,
    SpeedDensity,
    ShockwaveRing,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::BenefitHeatmap,
        Preset::UntruthfulHigh,
        Preset::UntruthfulLow,
        Preset::Vip,
        Preset::SpeedDensity,
        Preset::ShockwaveRing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::BenefitHeatmap => "benefit_heatmap",
            Preset::UntruthfulHigh => "untruthful_high",
            Preset::UntruthfulLow => "untruthful_low",
            Preset::Vip => "vip",
            Preset::SpeedDensity => "speed_density",
            Preset::ShockwaveRing => "shockwave_ring",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Density grid used by the density-controlled presets: 5 to 130 veh/km in
/// steps of 5, plus jam density.
pub fn default_densities(cfg: &SimConfig) -> Vec<f64> {
    let mut d: Vec<f64> = (1..=26).map(|k| 5.0 * k as f64).collect();
    d.push(cfg.jam_density());
    d
}

/// 0.05 to 1.0 in steps of 0.05.
pub fn default_penetrations() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// A sweep: the cartesian product of the four axes, each point run for
/// `n_seeds` seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub preset: Preset,
    pub base: SimConfig,
    /// Vehicles per km per lane.
    pub densities: Vec<f64>,
    pub penetrations: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Dollars per hour.
    pub vot_highs: Vec<f64>,
    pub n_seeds: u32,
    pub warmup: u64,
    /// Total steps per run, warm-up included.
    pub horizon: u64,
    pub heatmap_time_bin: u64,
    pub heatmap_space_bin: u32,
}

/// One combination of sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub density: f64,
    pub penetration: f64,
    pub ratio: f64,
    pub vot_high: f64,
}

impl ScenarioSpec {
    pub fn preset(preset: Preset) -> Self {
        let base = SimConfig::default();
        let mut spec = ScenarioSpec {
            preset,
            densities: default_densities(&base),
            penetrations: default_penetrations(),
            ratios: vec![base.high_low_ratio],
            vot_highs: vec![base.vot_high],
            n_seeds: 10,
            warmup: 600,
            horizon: 3600,
            heatmap_time_bin: 10,
            heatmap_space_bin: 5,
            base,
        };
        match preset {
            Preset::BenefitHeatmap => {}
            Preset::UntruthfulHigh => spec.base.untruthful_mode = UntruthfulMode::HighDeclaresLow,
            Preset::UntruthfulLow => spec.base.untruthful_mode = UntruthfulMode::LowDeclaresHigh,
            Preset::Vip => {
                spec.densities = vec![40.0, 60.0, 80.0, 100.0, 120.0];
                spec.penetrations = vec![1.0];
                spec.ratios = vec![0.01];
                spec.vot_highs = (2..=12).map(|k| 5.0 * k as f64).collect();
            }
            Preset::SpeedDensity => spec.penetrations = vec![0.0, 0.5, 1.0],
            Preset::ShockwaveRing => {
                spec.base.n_cells = 600;
                spec.densities = vec![13.3, 33.3];
                spec.penetrations = vec![1.0, 0.0];
                spec.n_seeds = 1;
                spec.warmup = 0;
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |key, reason: &str| {
            Err(SimError::InvalidConfig {
                key,
                reason: reason.into(),
            })
        };
        for (key, axis) in [
            ("scenario.densities", &self.densities),
            ("scenario.penetrations", &self.penetrations),
            ("scenario.ratios", &self.ratios),
            ("scenario.vot_highs", &self.vot_highs),
        ] {
            if axis.is_empty() {
                return err(key, "axis is empty");
            }
        }
        if self.n_seeds == 0 {
            return err("scenario.n_seeds", "need at least one seed");
        }
        if self.heatmap_time_bin == 0 || self.heatmap_space_bin == 0 {
            return err("output.heatmap_bins", "bins must be positive");
        }
        if self.base.boundary != Boundary::Ring {
            return err("sim.boundary", "density-controlled sweeps run on a ring");
        }
        for p in self.points() {
            self.config_for(&p, self.base.seed).validate()?;
        }
        Ok(())
    }

    /// Grid points in canonical order: density outermost, then
    /// penetration, ratio, and high VOT.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &density in &self.densities {
            for &penetration in &self.penetrations {
                for &ratio in &self.ratios {
                    for &vot_high in &self.vot_highs {
                        out.push(GridPoint {
                            index: out.len(),
                            density,
                            penetration,
                            ratio,
                            vot_high,
                        });
                    }
                }
            }
        }
        out
    }

    /// Seeds shared by every grid point.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|k| self.base.seed.wrapping_add(k)).collect()
    }

    pub fn config_for(&self, p: &GridPoint, seed: u64) -> SimConfig {
        SimConfig {
            population: crate::sim::Population::Density(p.density),
            tv_penetration: p.penetration,
            high_low_ratio: p.ratio,
            vot_high: p.vot_high,
            seed,
            warmup: self.warmup,
            steps: self.horizon,
            ..self.base.clone()
        }
    }
}
