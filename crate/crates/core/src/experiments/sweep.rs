use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridPoint, ScenarioSpec};
use crate::metrics::{speed_density_aggregate, ClassFilter, ClassLabel};
use crate::sim::{SimConfig, SimError, Simulation};

/// Measured quantities for one class in one run. Fields are `None` when
/// the class has no vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: ClassLabel,
    pub vehicles: usize,
    pub mean_speed_kmh: Option<f64>,
    /// Dollars per hour-travel.
    pub beta: Option<f64>,
    pub income_per_h: Option<f64>,
    pub time_saved_s_per_h: Option<f64>,
    /// β over the class's VOT-weighted travel value.
    pub beta_relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub density: f64,
    /// In `ClassLabel::ALL` order.
    pub classes: Vec<ClassSummary>,
    /// Vehicles per hour per lane through a fixed section.
    pub flow_veh_h: f64,
    pub games: usize,
    pub tu_games: usize,
    pub lane_changes: u64,
}

impl RunSummary {
    pub fn class(&self, label: ClassLabel) -> &ClassSummary {
        self.classes.iter().find(|c| c.class == label).expect("every label is present")
    }
}

fn filter_for(label: ClassLabel) -> ClassFilter {
    match label.class() {
        Some(c) => ClassFilter::Class(c),
        None => ClassFilter::All,
    }
}

/// Runs one configuration to completion and summarises it.
pub fn run_point(cfg: &SimConfig) -> Result<RunSummary, SimError> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run()?;
    Ok(summarize(&sim))
}

/// Class speeds and benefits of a finished simulation, measured after its
/// warm-up.
pub fn summarize(sim: &Simulation) -> RunSummary {
    let cfg = sim.config();
    let kmh = cfg.kmh_per_cell_step();
    let speeds = speed_density_aggregate(sim.stats(), cfg.density(), cfg.warmup, kmh);
    let ledger = sim.ledger();

    let mut classes = Vec::with_capacity(4);
    for label in ClassLabel::ALL {
        let vehicles = match label.class() {
            Some(c) => sim.lattice().vehicles().iter().filter(|v| v.class == c).count(),
            None => sim.lattice().len(),
        };
        let mean_speed_kmh = speeds.iter().find(|r| r.class == label).map(|r| r.mean_speed_kmh);
        // an empty class has no benefit
        let benefit = ledger.benefit_index(filter_for(label)).ok();
        classes.push(ClassSummary {
            class: label,
            vehicles,
            mean_speed_kmh,
            beta: benefit.map(|b| b.beta),
            income_per_h: benefit.map(|b| b.income_per_h),
            time_saved_s_per_h: benefit.map(|b| b.time_saved_s_per_h),
            beta_relative: benefit.map(|b| b.relative()),
        });
    }

    let measured = ledger.records().iter().filter(|r| r.step >= cfg.warmup);
    let (games, tu_games) = measured.fold((0, 0), |(g, t), r| (g + 1, t + (r.kind == crate::metrics::GameKind::Tu) as usize));
    let lane_changes = sim.stats().iter().filter(|s| s.step >= cfg.warmup).map(|s| s.lane_changes as u64).sum();
    let all_speed = classes[0].mean_speed_kmh.unwrap_or(0.0);

    RunSummary {
        density: cfg.density(),
        classes,
        flow_veh_h: cfg.density() * all_speed,
        games,
        tu_games,
        lane_changes,
    }
}

/// Result of one (grid point, seed) job. Failures are kept as text so a
/// sweep always completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRun {
    pub point: GridPoint,
    pub seed: u64,
    pub outcome: Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ScenarioSpec,
    /// Ordered by grid index, then seed.
    pub runs: Vec<PointRun>,
}

/// Seed-averaged class quantities; each mean runs over the seeds where the
/// value is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedClass {
    pub class: ClassLabel,
    pub mean_speed_kmh: Option<f64>,
    pub beta: Option<f64>,
    pub income_per_h: Option<f64>,
    pub time_saved_s_per_h: Option<f64>,
    pub beta_relative: Option<f64>,
    /// Across-seed standard deviation of β.
    pub beta_sd: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    pub point: GridPoint,
    pub classes: Vec<AveragedClass>,
    pub flow_veh_h: f64,
    pub failed_seeds: usize,
}

impl AveragedPoint {
    pub fn class(&self, label: ClassLabel) -> &AveragedClass {
        self.classes.iter().find(|c| c.class == label).expect("every label is present")
    }
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sd_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    if v.len() < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &PointRun> {
        self.runs.iter().filter(|r| r.outcome.is_err())
    }

    pub fn is_complete(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn averaged(&self) -> Vec<AveragedPoint> {
        self.spec
            .points()
            .into_iter()
            .map(|point| {
                let runs: Vec<&RunSummary> = self
                    .runs
                    .iter()
                    .filter(|r| r.point.index == point.index)
                    .filter_map(|r| r.outcome.as_ref().ok())
                    .collect();
                let failed_seeds = self.runs.iter().filter(|r| r.point.index == point.index && r.outcome.is_err()).count();
                let classes = ClassLabel::ALL
                    .into_iter()
                    .map(|label| {
                        let cs = || runs.iter().map(move |r| r.class(label));
                        AveragedClass {
                            class: label,
                            mean_speed_kmh: mean_of(cs().map(|c| c.mean_speed_kmh)),
                            beta: mean_of(cs().map(|c| c.beta)),
                            income_per_h: mean_of(cs().map(|c| c.income_per_h)),
                            time_saved_s_per_h: mean_of(cs().map(|c| c.time_saved_s_per_h)),
                            beta_relative: mean_of(cs().map(|c| c.beta_relative)),
                            beta_sd: sd_of(cs().map(|c| c.beta)),
                            seeds: cs().filter(|c| c.beta.is_some()).count(),
                        }
                    })
                    .collect();
                let flow = if runs.is_empty() {
                    0.0
                } else {
                    runs.iter().map(|r| r.flow_veh_h).sum::<f64>() / runs.len() as f64
                };
                AveragedPoint {
                    point,
                    classes,
                    flow_veh_h: flow,
                    failed_seeds,
                }
            })
            .collect()
    }
}

/// Runs every (grid point, seed) pair on up to `jobs` threads. Output order
/// is canonical and independent of `jobs`.
pub fn run_sweep(spec: &ScenarioSpec, jobs: usize) -> Result<SweepResult, SimError> {
    spec.validate()?;
    let seeds = spec.seeds();
    let tasks: Vec<(GridPoint, u64)> = spec
        .points()
        .into_iter()
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let work = |&(point, seed): &(GridPoint, u64)| PointRun {
        point,
        seed,
        outcome: run_point(&spec.config_for(&point, seed)).map_err(|e| e.to_string()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let runs = pool.install(|| tasks.par_iter().map(work).collect());
    Ok(SweepResult {
        spec: spec.clone(),
        runs,
    })
}
