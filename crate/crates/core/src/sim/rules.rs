//! One pass of the two-lane automaton: candidate speeds, random slowdown,
//! lead/lag games, and the state update.

use super::equilibrium::ClassSpeeds;
use super::rng::{bernoulli, KeyedStreams, Purpose};
use super::{Lattice, SimConfig, SimError, VehicleState};
use crate::game::{build_utility_matrix, solve_ntu, solve_tu, time_difference, JointAction, SpeedScenario};
use crate::metrics::{GameKind, GameLedger, GameRecord, StepStats};

/// Speeds a vehicle could adopt this step, before any game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidates {
    pub v_stay: u32,
    pub v_change: u32,
    /// Distance to the leader in the vehicle's own lane (`None`: no leader).
    pub d_s: Option<u32>,
    /// Distance to the leader in the other lane; 0 when the adjacent cell
    /// is occupied.
    pub d_t: Option<u32>,
}

/// Largest safe advance behind a leader `d` cells ahead: ⌈(d − 1)/2⌉.
pub fn gap_cap(d: Option<u32>) -> u32 {
    match d {
        None => u32::MAX,
        Some(d) => d.saturating_sub(1).div_ceil(2),
    }
}

pub fn candidate_speeds(veh: &VehicleState, lat: &Lattice, cfg: &SimConfig) -> Candidates {
    let v = (veh.v + cfg.a_pos).min(cfg.v_max);
    let d_s = lat.leader_gap(veh.lane, veh.cell, false);
    let d_t = lat.leader_gap(1 - veh.lane, veh.cell, true);
    let v_stay = v.min(gap_cap(d_s));
    let v_change = v.min(v_stay + 1).min(gap_cap(d_t));
    Candidates {
        v_stay,
        v_change,
        d_s,
        d_t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Undecided,
    Stay,
    Change,
}

/// Per-vehicle working state for one step, indexed like `Lattice::vehicles`.
#[derive(Debug, Clone, Default)]
pub struct StepPlan {
    pub v_stay: Vec<u32>,
    pub v_change: Vec<u32>,
    pub decision: Vec<Decision>,
    pub in_game: Vec<bool>,
}

impl StepPlan {
    pub fn reset(&mut self, n: usize) {
        self.v_stay.clear();
        self.v_stay.resize(n, 0);
        self.v_change.clear();
        self.v_change.resize(n, 0);
        self.decision.clear();
        self.decision.resize(n, Decision::Undecided);
        self.in_game.clear();
        self.in_game.resize(n, false);
    }

    /// Speed the vehicle will actually drive.
    pub fn final_speed(&self, k: usize) -> u32 {
        match self.decision[k] {
            Decision::Change => self.v_change[k],
            _ => self.v_stay[k],
        }
    }
}

fn scenario(cfg: &SimConfig, v0: u32, high: u32, low: u32, v_e: f64) -> SpeedScenario {
    let v1 = cfg.speed_ms(high);
    let v2 = cfg.speed_ms(low);
    // each leg relaxes toward v_e, so the rate sign follows the direction
    let a1 = if v1 >= v_e { cfg.accel_neg_ms2() } else { cfg.accel_pos_ms2() };
    let a2 = if v2 <= v_e { cfg.accel_pos_ms2() } else { cfg.accel_neg_ms2() };
    SpeedScenario {
        v0: cfg.speed_ms(v0),
        v1,
        v2,
        v_e,
        ta: cfg.ta,
        a1,
        a2,
    }
}

fn td(s: &SpeedScenario) -> f64 {
    // both legs use the same rate magnitude whenever they relax in the same
    // direction, so the distance gain cannot be negative
    time_difference(s).expect("direction-signed scenario is always consistent")
}

/// Resolves lead/lag conflicts in downstream-first `order`.
///
/// A vehicle whose change candidate beats its stay candidate looks for the
/// nearest lag vehicle in the target lane. If that vehicle would have to
/// slow down to stay behind it, the two play a game: TU when both are TVs,
/// Nash bargaining otherwise. A vehicle takes part in at most one game per
/// step; a conflict with a vehicle already committed to a game keeps the
/// changer in its lane.
pub fn pair_and_play(
    lat: &Lattice,
    plan: &mut StepPlan,
    order: &[usize],
    ve: &ClassSpeeds,
    cfg: &SimConfig,
    streams: &KeyedStreams,
) -> Vec<GameRecord> {
    let vehicles = lat.vehicles();
    let mut games = Vec::new();
    for &a in order {
        if plan.decision[a] != Decision::Undecided {
            continue;
        }
        if plan.v_change[a] <= plan.v_stay[a] {
            plan.decision[a] = Decision::Stay;
            continue;
        }
        let va = &vehicles[a];
        let target = 1 - va.lane;
        let lag = lat.lag_where(target, va.cell, |k| plan.decision[k] == Decision::Change);
        let Some((b, d_ab)) = lag else {
            plan.decision[a] = Decision::Change;
            continue;
        };
        let give_way = gap_cap(Some(d_ab));
        if plan.v_stay[b] <= give_way {
            plan.decision[a] = Decision::Change;
            continue;
        }
        if plan.in_game[b] {
            plan.decision[a] = Decision::Stay;
            continue;
        }

        let vb = &vehicles[b];
        let s_a = scenario(cfg, va.v, plan.v_change[a], plan.v_stay[a], ve.get(va.class));
        let s_b = scenario(cfg, vb.v, plan.v_stay[b], give_way, ve.get(vb.class));
        let (td_a, td_b) = (td(&s_a), td(&s_b));
        let g = build_utility_matrix(vb_rate(va), td_a, vb_rate(vb), td_b, cfg.crash_penalty)
            .expect("crash penalty dominates lane-change gains");

        let (kind, action, sigma, joint) = if va.class.is_tv() && vb.class.is_tv() {
            let out = solve_tu(&g);
            (GameKind::Tu, out.action, out.sigma, out.omega_star)
        } else {
            let mut coin = streams.rng(Purpose::Coin, lat.step, va.id.0);
            let out = solve_ntu(&g, &mut coin).expect("utility matrix has lane-change structure");
            let action = out.realized_action;
            (GameKind::Ntu, action, 0.0, g.total_at(action))
        };
        debug_assert!(action != JointAction::CRASH);

        plan.in_game[a] = true;
        plan.in_game[b] = true;
        plan.decision[a] = if action.a_changes() {
            Decision::Change
        } else {
            Decision::Stay
        };
        plan.decision[b] = Decision::Stay;
        if action.a_changes() {
            plan.v_stay[b] = give_way;
        }

        games.push(GameRecord {
            step: lat.step,
            a_id: va.id,
            b_id: vb.id,
            a_class: va.class,
            b_class: vb.class,
            kind,
            action,
            sigma,
            joint_payoff: joint,
            td_a,
            td_b,
            dt_a: if action.a_changes() { td_a } else { 0.0 },
            dt_b: if action.b_keeps() { td_b } else { 0.0 },
            cvot_a_declared: va.cvot_declared,
            cvot_a_true: va.cvot_true,
            cvot_b_declared: vb.cvot_declared,
            cvot_b_true: vb.cvot_true,
        });
    }
    games
}

/// Declared VOT is what enters the game.
fn vb_rate(v: &VehicleState) -> f64 {
    v.cvot_declared
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default, Clone)]
pub struct StepScratch {
    order: Vec<usize>,
    draws: Vec<u64>,
    plan: StepPlan,
}

/// Outcome of one call to [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub stats: StepStats,
    pub spilled: u32,
}

/// Advances the lattice by one step and appends the games to `ledger`.
pub fn step(
    lat: &mut Lattice,
    cfg: &SimConfig,
    streams: &KeyedStreams,
    ledger: &mut GameLedger,
    ve: &ClassSpeeds,
    scratch: &mut StepScratch,
) -> Result<StepReport, SimError> {
    let t = lat.step;
    let n = lat.len();
    lat.downstream_order(&mut scratch.order);
    let plan = &mut scratch.plan;
    plan.reset(n);

    for &k in &scratch.order {
        let c = candidate_speeds(&lat.vehicles()[k], lat, cfg);
        plan.v_stay[k] = c.v_stay;
        plan.v_change[k] = c.v_change;
    }

    // one slowdown draw per vehicle, applied to both candidates
    let (lo, hi) = id_range(lat.vehicles());
    streams.fill(Purpose::Slowdown, t, lo..hi, &mut scratch.draws);
    for (k, v) in lat.vehicles().iter().enumerate() {
        if bernoulli(scratch.draws[(v.id.0 - lo) as usize], cfg.p_sd) {
            plan.v_stay[k] = plan.v_stay[k].saturating_sub(1);
            plan.v_change[k] = plan.v_change[k].saturating_sub(1);
        }
    }

    let games = pair_and_play(lat, plan, &scratch.order, ve, cfg, streams);

    let mut stats = StepStats {
        step: t,
        games: games.len() as u32,
        ..Default::default()
    };
    let n_cells = lat.n_cells();
    let ring = lat.is_ring();
    let mut moved = Vec::with_capacity(n + 2);
    let mut exits = Vec::new();
    for (k, v) in lat.vehicles().iter().enumerate() {
        let speed = plan.final_speed(k);
        let mut next = v.clone();
        next.v = speed;
        if plan.decision[k] == Decision::Change {
            next.lane = 1 - v.lane;
            stats.lane_changes += 1;
        }
        ledger.add_distance(v.id, speed);
        let cell = v.cell + speed;
        if cell >= n_cells {
            if ring {
                next.cell = cell - n_cells;
            } else {
                exits.push(v.id);
                continue;
            }
        } else {
            next.cell = cell;
        }
        moved.push(next);
    }
    ledger.extend(games);
    lat.replace_vehicles(moved)?;
    for id in exits {
        ledger.close_trip(id, t + 1);
    }

    let mut spilled = 0;
    if !ring && cfg.inflow_rate > 0.0 {
        spilled = inject(lat, cfg, streams, ledger, t)?;
    }

    for v in lat.vehicles() {
        stats.count[v.class.index()] += 1;
        stats.speed_sum[v.class.index()] += v.v as u64;
    }
    lat.step = t + 1;
    ledger.set_now(lat.step);
    Ok(StepReport { stats, spilled })
}

fn id_range(vehicles: &[VehicleState]) -> (u32, u32) {
    let lo = vehicles.iter().map(|v| v.id.0).min().unwrap_or(0);
    let hi = vehicles.iter().map(|v| v.id.0 + 1).max().unwrap_or(0);
    (lo, hi)
}

/// Open boundary: each lane independently receives a vehicle at cell 0
/// with probability `inflow_rate`, entering at `v_max`. Blocked entries are
/// dropped and counted.
fn inject(
    lat: &mut Lattice,
    cfg: &SimConfig,
    streams: &KeyedStreams,
    ledger: &mut GameLedger,
    t: u64,
) -> Result<u32, SimError> {
    let mut spilled = 0;
    for lane in 0..2u8 {
        let mut r = streams.rng(Purpose::Inject, t, lane as u32);
        if !rand::Rng::gen_bool(&mut r, cfg.inflow_rate) {
            continue;
        }
        if !lat.is_free(lane, 0) {
            spilled += 1;
            continue;
        }
        let id = lat.next_id;
        let mut cr = streams.rng(Purpose::InjectClass, 0, id);
        let class = super::draw_class(&mut cr, cfg);
        let veh = super::new_vehicle(cfg, id, class, lane, 0, cfg.v_max, t + 1);
        ledger.open_trip(super::trip_for(&veh));
        lat.insert(veh)?;
        lat.next_id += 1;
    }
    Ok(spilled)
}
