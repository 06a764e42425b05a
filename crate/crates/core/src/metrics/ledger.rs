use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::JointAction;
use crate::sim::{VehicleClass, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Tu,
    Ntu,
}

/// One played lane-change game. VOT rates are dollars per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub step: u64,
    pub a_id: VehicleId,
    pub b_id: VehicleId,
    pub a_class: VehicleClass,
    pub b_class: VehicleClass,
    pub kind: GameKind,
    pub action: JointAction,
    /// Transfer from A to B; zero for bargaining games.
    pub sigma: f64,
    /// Joint payoff of the realized cell (ω* for TU games).
    pub joint_payoff: f64,
    pub td_a: f64,
    pub td_b: f64,
    /// Realized time saved by A: `td_a` if A changed lanes.
    pub dt_a: f64,
    /// Realized time saved by B: `td_b` if B kept its lane.
    pub dt_b: f64,
    pub cvot_a_declared: f64,
    pub cvot_a_true: f64,
    pub cvot_b_declared: f64,
    pub cvot_b_true: f64,
}

impl GameRecord {
    /// True-VOT benefit of A in this game: time value plus net income.
    pub fn benefit_a(&self) -> f64 {
        self.cvot_a_true * self.dt_a - self.sigma
    }

    pub fn benefit_b(&self) -> f64 {
        self.cvot_b_true * self.dt_b + self.sigma
    }
}

/// Travel-time bookkeeping for one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub cvot_true: f64,
    pub cvot_declared: f64,
    pub entry_step: u64,
    pub exit_step: Option<u64>,
    /// Cells advanced while inside the measurement window.
    pub distance_cells: u64,
}

/// Append-only record of every game plus per-vehicle trips.
///
/// Games and travel time before `measure_from` belong to the warm-up and are
/// excluded from every aggregate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GameLedger {
    records: Vec<GameRecord>,
    trips: Vec<Trip>,
    measure_from: u64,
    now: u64,
    dt: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no vehicle with positive measured travel time matches {0:?}")]
    EmptyClass(ClassFilter),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassFilter {
    Class(VehicleClass),
    AllTv,
    All,
}

impl ClassFilter {
    pub fn matches(self, class: VehicleClass) -> bool {
        match self {
            ClassFilter::Class(c) => c == class,
            ClassFilter::AllTv => class.is_tv(),
            ClassFilter::All => true,
        }
    }
}

/// Class-level accounting, all per hour of mean travel time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benefit {
    /// Benefit index: VOT-weighted time saved plus net income.
    pub beta: f64,
    pub income_per_h: f64,
    pub time_saved_s_per_h: f64,
    /// VOT-weighted travel time of the class, same normalization as `beta`.
    pub travel_value: f64,
    pub mean_travel_h: f64,
    pub vehicles: usize,
    pub games: usize,
}

impl Benefit {
    /// β as a fraction of the class's VOT-weighted travel time.
    pub fn relative(&self) -> f64 {
        if self.travel_value == 0.0 {
            0.0
        } else {
            self.beta / self.travel_value
        }
    }
}

impl GameLedger {
    pub fn new(dt: f64, measure_from: u64) -> Self {
        GameLedger {
            dt,
            measure_from,
            ..Default::default()
        }
    }

    pub fn records(&self) -> &[GameRecord] {
        &self.records
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn measure_from(&self) -> u64 {
        self.measure_from
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn push(&mut self, record: GameRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = GameRecord>) {
        self.records.extend(records);
    }

    /// Registers a vehicle. Ids are expected to be dense and increasing.
    pub fn open_trip(&mut self, trip: Trip) {
        let idx = trip.id.0 as usize;
        if idx >= self.trips.len() {
            self.trips.resize_with(idx + 1, placeholder_trip);
        }
        self.trips[idx] = trip;
    }

    pub fn close_trip(&mut self, id: VehicleId, step: u64) {
        if let Some(t) = self.trips.get_mut(id.0 as usize) {
            t.exit_step = Some(step);
        }
    }

    pub fn add_distance(&mut self, id: VehicleId, cells: u32) {
        if self.now >= self.measure_from {
            if let Some(t) = self.trips.get_mut(id.0 as usize) {
                t.distance_cells += cells as u64;
            }
        }
    }

    pub fn set_now(&mut self, step: u64) {
        self.now = step;
    }

    /// Measured travel time of a trip in seconds.
    pub fn travel_time_s(&self, trip: &Trip) -> f64 {
        let start = trip.entry_step.max(self.measure_from);
        let end = trip.exit_step.unwrap_or(self.now);
        end.saturating_sub(start) as f64 * self.dt
    }

    fn measured(&self) -> impl Iterator<Item = &GameRecord> {
        let from = self.measure_from;
        self.records.iter().filter(move |r| r.step >= from)
    }

    /// Net money created by all games: A's income plus B's income. Zero
    /// when every transfer is balanced.
    pub fn net_payment_balance(&self) -> f64 {
        self.records
            .iter()
            .map(|r| (r.benefit_a() - r.cvot_a_true * r.dt_a) + (r.benefit_b() - r.cvot_b_true * r.dt_b))
            .sum()
    }

    pub fn benefit_index(&self, filter: ClassFilter) -> Result<Benefit, MetricsError> {
        let mut vehicles = 0usize;
        let mut total_travel_s = 0.0;
        let mut travel_value = 0.0;
        for trip in self.trips.iter().filter(|t| t.entry_step != u64::MAX) {
            if !filter.matches(trip.class) {
                continue;
            }
            let t = self.travel_time_s(trip);
            if t > 0.0 {
                vehicles += 1;
                total_travel_s += t;
                travel_value += trip.cvot_true * t;
            }
        }
        if vehicles == 0 {
            return Err(MetricsError::EmptyClass(filter));
        }
        let mean_travel_h = total_travel_s / vehicles as f64 / 3600.0;

        let (mut benefit, mut income, mut saved) = (0.0, 0.0, 0.0);
        let mut games = 0;
        for r in self.measured() {
            let mut involved = false;
            if filter.matches(r.a_class) {
                benefit += r.benefit_a();
                income -= r.sigma;
                saved += r.dt_a;
                involved = true;
            }
            if filter.matches(r.b_class) {
                benefit += r.benefit_b();
                income += r.sigma;
                saved += r.dt_b;
                involved = true;
            }
            games += involved as usize;
        }
        Ok(Benefit {
            beta: benefit / mean_travel_h,
            income_per_h: income / mean_travel_h,
            time_saved_s_per_h: saved / mean_travel_h,
            travel_value: travel_value / mean_travel_h,
            mean_travel_h,
            vehicles,
            games,
        })
    }
}

fn placeholder_trip() -> Trip {
    Trip {
        id: VehicleId(u32::MAX),
        class: VehicleClass::Ntv,
        cvot_true: 0.0,
        cvot_declared: 0.0,
        entry_step: u64::MAX,
        exit_step: None,
        distance_cells: 0,
    }
}
