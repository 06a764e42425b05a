//! Two-lane cellular automaton with game-based lane changes.

mod config;
mod equilibrium;
mod lattice;
mod rng;
mod rules;

pub use config::{Boundary, Population, SimConfig, UntruthfulMode, VeSource};
pub use equilibrium::{equilibrium_speeds, ClassSpeeds, SpeedHistory, MIN_CLASS_SAMPLE, VE_FLOOR};
pub use lattice::{Lattice, VehicleClass, VehicleId, VehicleState};
pub use rng::{bernoulli, KeyedStreams, Purpose};
pub use rules::{candidate_speeds, gap_cap, pair_and_play, step, Candidates, Decision, StepPlan, StepReport, StepScratch};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::metrics::{GameLedger, StepStats, Trip};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid value for {key}: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("lane {lane} cell {cell} is outside the lattice")]
    OutOfLattice { lane: u8, cell: u32 },
    #[error("lane {lane} cell {cell} is already occupied")]
    Occupied { lane: u8, cell: u32 },
    #[error("collision at step {step}, lane {lane} cell {cell}")]
    Collision { step: u64, lane: u8, cell: u32 },
}

fn declared_vot(cfg: &SimConfig, class: VehicleClass) -> f64 {
    match (class, cfg.untruthful_mode) {
        (VehicleClass::TvHigh, UntruthfulMode::HighDeclaresLow) => cfg.vot_low,
        (VehicleClass::TvLow, UntruthfulMode::LowDeclaresHigh) => cfg.vot_high,
        (VehicleClass::TvHigh, _) => cfg.vot_high,
        _ => cfg.vot_low,
    }
}

fn true_vot(cfg: &SimConfig, class: VehicleClass) -> f64 {
    match class {
        VehicleClass::TvHigh => cfg.vot_high,
        _ => cfg.vot_low,
    }
}

pub(crate) fn new_vehicle(
    cfg: &SimConfig,
    id: u32,
    class: VehicleClass,
    lane: u8,
    cell: u32,
    v: u32,
    entry_step: u64,
) -> VehicleState {
    VehicleState {
        id: VehicleId(id),
        lane,
        cell,
        v,
        class,
        cvot_true: true_vot(cfg, class) / 3600.0,
        cvot_declared: declared_vot(cfg, class) / 3600.0,
        entry_step,
    }
}

pub(crate) fn trip_for(v: &VehicleState) -> Trip {
    Trip {
        id: v.id,
        class: v.class,
        cvot_true: v.cvot_true,
        cvot_declared: v.cvot_declared,
        entry_step: v.entry_step,
        exit_step: None,
        distance_cells: 0,
    }
}

/// Class of an injected vehicle, drawn independently.
pub(crate) fn draw_class(rng: &mut impl Rng, cfg: &SimConfig) -> VehicleClass {
    let tv = rng.gen::<f64>() < cfg.tv_penetration;
    let high = rng.gen::<f64>() < cfg.high_low_ratio;
    match (tv, high) {
        (false, _) => VehicleClass::Ntv,
        (true, true) => VehicleClass::TvHigh,
        (true, false) => VehicleClass::TvLow,
    }
}

/// Exact class counts for `n` vehicles, in shuffled order.
fn class_mix(n: u32, cfg: &SimConfig, rng: &mut impl Rng) -> Vec<VehicleClass> {
    let n_tv = ((cfg.tv_penetration * n as f64).round() as u32).min(n);
    let n_high = ((cfg.high_low_ratio * n_tv as f64).round() as u32).min(n_tv);
    let mut classes = Vec::with_capacity(n as usize);
    classes.extend(std::iter::repeat_n(VehicleClass::TvHigh, n_high as usize));
    classes.extend(std::iter::repeat_n(VehicleClass::TvLow, (n_tv - n_high) as usize));
    classes.extend(std::iter::repeat_n(VehicleClass::Ntv, (n - n_tv) as usize));
    classes.shuffle(rng);
    classes
}

/// Initial lattice: vehicles on distinct random cells, at rest.
pub fn initial_lattice(cfg: &SimConfig) -> Result<Lattice, SimError> {
    cfg.validate()?;
    let n = cfg.initial_vehicles();
    let mut rng = KeyedStreams::new(cfg.seed).setup();
    let mut slots = rand::seq::index::sample(&mut rng, cfg.capacity() as usize, n as usize).into_vec();
    slots.sort_unstable();
    let classes = class_mix(n, cfg, &mut rng);
    let mut lat = Lattice::new(cfg.n_cells, cfg.boundary == Boundary::Ring);
    for (i, (slot, class)) in slots.into_iter().zip(classes).enumerate() {
        let cell = (slot / 2) as u32;
        let lane = (slot % 2) as u8;
        lat.insert(new_vehicle(cfg, i as u32, class, lane, cell, 0, 0))?;
    }
    Ok(lat)
}

/// Owns a lattice, its game ledger, and the per-step speed record.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    lattice: Lattice,
    ledger: GameLedger,
    streams: KeyedStreams,
    history: SpeedHistory,
    stats: Vec<StepStats>,
    spilled: u64,
    scratch: StepScratch,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let lat = initial_lattice(&cfg)?;
        Self::from_lattice(cfg, lat)
    }

    /// Starts from a hand-built lattice. Vehicle ids must be dense from 0.
    pub fn from_lattice(cfg: SimConfig, lattice: Lattice) -> Result<Self, SimError> {
        cfg.validate()?;
        if lattice.n_cells() != cfg.n_cells {
            return Err(SimError::InvalidConfig {
                key: "n_cells",
                reason: "lattice size differs from configuration".into(),
            });
        }
        let mut ledger = GameLedger::new(cfg.dt, cfg.warmup);
        for v in lattice.vehicles() {
            ledger.open_trip(trip_for(v));
        }
        ledger.set_now(lattice.step);
        let mut history = SpeedHistory::new(cfg.ve_window);
        history.record_lattice(&lattice);
        Ok(Simulation {
            streams: KeyedStreams::new(cfg.seed),
            stats: Vec::with_capacity(cfg.steps as usize),
            cfg,
            lattice,
            ledger,
            history,
            spilled: 0,
            scratch: StepScratch::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ledger(&self) -> &GameLedger {
        &self.ledger
    }

    /// One entry per completed step.
    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    /// Injection attempts that found the entry cell occupied.
    pub fn spilled(&self) -> u64 {
        self.spilled
    }

    pub fn into_parts(self) -> (Lattice, GameLedger, Vec<StepStats>) {
        (self.lattice, self.ledger, self.stats)
    }

    pub fn equilibrium(&self) -> ClassSpeeds {
        equilibrium_speeds(&self.history, &self.lattice, &self.cfg)
    }

    pub fn step(&mut self) -> Result<&StepStats, SimError> {
        let ve = self.equilibrium();
        let report = rules::step(
            &mut self.lattice,
            &self.cfg,
            &self.streams,
            &mut self.ledger,
            &ve,
            &mut self.scratch,
        )?;
        self.history.record(&report.stats);
        self.spilled += report.spilled as u64;
        self.stats.push(report.stats);
        Ok(self.stats.last().expect("just pushed"))
    }

    /// Runs to `cfg.steps`.
    pub fn run(&mut self) -> Result<(), SimError> {
        self.run_observed(|_| {})
    }

    /// Runs to `cfg.steps`, calling `observe` after every step.
    pub fn run_observed(&mut self, mut observe: impl FnMut(&Lattice)) -> Result<(), SimError> {
        while self.lattice.step < self.cfg.steps {
            self.step()?;
            observe(&self.lattice);
        }
        Ok(())
    }
}
