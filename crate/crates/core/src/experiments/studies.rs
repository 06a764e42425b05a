use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_sweep, Preset, ScenarioSpec, SweepResult};
use crate::metrics::{band_tracks, BandTrack, ClassLabel, Heatmap, HeatmapSpec, TrajectorySample};
use crate::sim::{SimConfig, SimError, Simulation, VeSource};

/// Bins slower than this (cells/step) count as part of a jam band.
pub const LOW_SPEED_THRESHOLD: f64 = 1.5;

/// Time saved by the rare high-VOT class relative to the low-VOT class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VipRow {
    pub density: f64,
    pub vot_high: f64,
    pub seed: u64,
    /// 100·(1 − v_low/v_high) from measured mean speeds; travel time saved
    /// over the same distance.
    pub time_saved_pct: Option<f64>,
    /// Model time savings of the high class as a share of its travel time.
    pub game_time_saved_pct: Option<f64>,
}

pub fn run_vip(spec: &ScenarioSpec, jobs: usize) -> Result<(SweepResult, Vec<VipRow>), SimError> {
    let sweep = run_sweep(spec, jobs)?;
    let rows = sweep
        .runs
        .iter()
        .map(|r| {
            let (saved, game) = match &r.outcome {
                Ok(sum) => {
                    let hi = sum.class(ClassLabel::TvHigh);
                    let lo = sum.class(ClassLabel::TvLow);
                    let saved = match (hi.mean_speed_kmh, lo.mean_speed_kmh) {
                        (Some(h), Some(l)) if h > 0.0 => Some(100.0 * (1.0 - l / h)),
                        _ => None,
                    };
                    let game = hi
                        .time_saved_s_per_h
                        .filter(|_| hi.vehicles > 0)
                        .map(|s| 100.0 * s / hi.vehicles as f64 / 3600.0);
                    (saved, game)
                }
                Err(_) => (None, None),
            };
            VipRow {
                density: r.point.density,
                vot_high: r.point.vot_high,
                seed: r.seed,
                time_saved_pct: saved,
                game_time_saved_pct: game,
            }
        })
        .collect();
    Ok((sweep, rows))
}

/// One space-time speed map of the shock-wave study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockwaveMap {
    pub density: f64,
    pub penetration: f64,
    pub seed: u64,
    pub heatmap: Heatmap,
    /// Low-speed bands followed for at least ten time bins.
    pub bands: Vec<BandTrack>,
}

impl ShockwaveMap {
    /// Bands drifting upstream.
    pub fn backward_bands(&self) -> impl Iterator<Item = &BandTrack> {
        self.bands.iter().filter(|b| b.slope < 0.0)
    }
}

/// Runs every grid point of `spec` once (first seed) and records a
/// lane-averaged speed map over the whole horizon.
pub fn run_shockwave(spec: &ScenarioSpec, jobs: usize) -> Result<Vec<ShockwaveMap>, SimError> {
    spec.validate()?;
    let seed = spec.base.seed;
    let hspec = HeatmapSpec {
        n_cells: spec.base.n_cells,
        start_step: spec.warmup,
        n_steps: spec.horizon - spec.warmup,
        time_bin: spec.heatmap_time_bin,
        space_bin: spec.heatmap_space_bin,
    };
    let one = |p: &super::GridPoint| -> Result<ShockwaveMap, SimError> {
        let cfg = spec.config_for(p, seed);
        let mut sim = Simulation::new(cfg)?;
        let mut map = Heatmap::new(hspec);
        sim.run_observed(|lat| {
            // the state after step t is sampled at time t
            let step = lat.step - 1;
            for v in lat.vehicles() {
                map.add(&TrajectorySample {
                    step,
                    vehicle: v.id.0,
                    lane: v.lane,
                    cell: v.cell,
                    speed: v.v,
                });
            }
        })?;
        let bands = band_tracks(&map, LOW_SPEED_THRESHOLD, 3.0, 10);
        Ok(ShockwaveMap {
            density: p.density,
            penetration: p.penetration,
            seed,
            heatmap: map,
            bands,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| spec.points().par_iter().map(one).collect())
}

/// Density to equilibrium speed lookup, shared by all classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    /// (veh/km per lane, km/h), densities increasing, speeds nonincreasing.
    pub rows: Vec<(f64, f64)>,
    /// Seed-averaged measurements before smoothing.
    pub raw: Vec<(f64, f64)>,
}

impl CalibrationTable {
    pub fn as_ve_source(&self) -> VeSource {
        VeSource::Table(self.rows.clone())
    }
}

/// Pool-adjacent-violators fit of a nonincreasing sequence (equal weights).
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// Measures the speed-density relation without transactions (no TVs, so
/// every conflict is a coin flip that ignores the equilibrium speed) and
/// smooths it into a nonincreasing lookup. The table is anchored at free
/// flow (`v_max` at zero density) and at jam density (zero speed).
pub fn calibrate(cfg: &SimConfig, densities: &[f64], n_seeds: u32, jobs: usize) -> Result<CalibrationTable, SimError> {
    let mut spec = ScenarioSpec::preset(Preset::SpeedDensity);
    spec.base = SimConfig {
        tv_penetration: 0.0,
        ve_source: VeSource::Trailing,
        ..cfg.clone()
    };
    spec.densities = densities
        .iter()
        .copied()
        .filter(|&d| d > 0.0 && d < cfg.jam_density())
        .collect();
    spec.penetrations = vec![0.0];
    spec.n_seeds = n_seeds;
    spec.warmup = cfg.warmup;
    spec.horizon = cfg.steps;
    if spec.densities.is_empty() {
        spec.densities = vec![cfg.jam_density() / 2.0];
    }
    let sweep = run_sweep(&spec, jobs)?;
    let mut raw = vec![(0.0, cfg.v_max as f64 * cfg.kmh_per_cell_step())];
    for p in sweep.averaged() {
        let v = p.class(ClassLabel::All).mean_speed_kmh.unwrap_or(0.0);
        raw.push((p.point.density, v));
    }
    raw.push((cfg.jam_density(), 0.0));
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    raw.dedup_by(|a, b| a.0 == b.0);
    let smooth = isotonic_nonincreasing(&raw.iter().map(|r| r.1).collect::<Vec<_>>());
    let rows = raw.iter().zip(smooth).map(|(&(d, _), v)| (d, v)).collect();
    Ok(CalibrationTable { rows, raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pav_pools_violations() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_nonincreasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert!(isotonic_nonincreasing(&[]).is_empty());
    }

    #[test]
    fn calibration_endpoints() {
        let cfg = SimConfig {
            n_cells: 200,
            steps: 150,
            warmup: 50,
            ..Default::default()
        };
        let t = calibrate(&cfg, &[20.0, 60.0, 100.0], 1, 1).unwrap();
        assert_eq!(t.rows.first().unwrap(), &(0.0, 135.0));
        assert_eq!(t.rows.last().unwrap().1, 0.0);
        assert!(t.rows.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn empty_ring_gives_blank_maps() {
        let mut spec = ScenarioSpec::preset(Preset::ShockwaveRing);
        spec.densities = vec![0.0];
        spec.horizon = 50;
        let maps = run_shockwave(&spec, 1).unwrap();
        assert_eq!(maps.len(), 2);
        assert!(maps.iter().all(|m| m.heatmap.is_empty() && m.bands.is_empty()));
    }
}
