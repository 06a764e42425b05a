use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{solve_zero_sum_2x2, BimatrixGame, GameError, JointAction, ZeroSumSolution};

/// Result of a transferable-utility game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuOutcome {
    /// Largest joint payoff over the four cells.
    pub omega_star: f64,
    pub action: JointAction,
    /// Signed transfer; positive means A pays B.
    pub sigma: f64,
    pub payoff_a: f64,
    pub payoff_b: f64,
    /// Expected payoffs (T_A, T_B) under the optimal threat strategies.
    pub threat: (f64, f64),
    /// T_A − T_B, the value of the zero-sum game A − B.
    pub theta: f64,
    pub threat_strategy: ZeroSumSolution,
}

/// Cells in tie-break order: the status quo wins ties, the crash cell loses.
const PREFERENCE: [JointAction; 4] = [
    JointAction::STATUS_QUO,
    JointAction::STAY_KEEP,
    JointAction::CHANGE_GIVE_WAY,
    JointAction::CRASH,
];

pub fn solve_tu(g: &BimatrixGame) -> TuOutcome {
    let mut action = PREFERENCE[0];
    let mut omega_star = g.total_at(action);
    for &cell in &PREFERENCE[1..] {
        let total = g.total_at(cell);
        if total > omega_star {
            omega_star = total;
            action = cell;
        }
    }

    let threat_strategy = solve_zero_sum_2x2(&g.difference());
    let theta = threat_strategy.value;
    let (p, q) = (threat_strategy.p(), threat_strategy.q());
    let expect = |t: &[[f64; 2]; 2]| {
        p * (q * t[0][0] + (1.0 - q) * t[0][1]) + (1.0 - p) * (q * t[1][0] + (1.0 - q) * t[1][1])
    };
    let threat = (expect(g.a()), expect(g.b()));

    let payoff_a = (theta + omega_star) / 2.0;
    let payoff_b = (omega_star - theta) / 2.0;
    let sigma = g.a_at(action) - payoff_a;

    TuOutcome {
        omega_star,
        action,
        sigma,
        payoff_a,
        payoff_b,
        threat,
        theta,
        threat_strategy,
    }
}

/// Result of a bargaining game without side payments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtuOutcome {
    pub n_a: f64,
    pub n_b: f64,
    pub status_quo: (f64, f64),
    pub realized_action: JointAction,
}

/// Nash bargaining from the (0, 0) status quo. The bargaining point is the
/// midpoint of the Pareto edge; it is realized by a fair coin between
/// "A changes, B gives way" and "A stays, B keeps its lane".
pub fn solve_ntu<R: Rng + ?Sized>(g: &BimatrixGame, coin: &mut R) -> Result<NtuOutcome, GameError> {
    g.check_lane_change_structure()?;
    let (gain_a, gain_b) = (g.gain_a(), g.gain_b());
    let realized_action = if gain_a == 0.0 && gain_b == 0.0 {
        JointAction::STATUS_QUO
    } else if coin.gen_bool(0.5) {
        JointAction::CHANGE_GIVE_WAY
    } else {
        JointAction::STAY_KEEP
    };
    Ok(NtuOutcome {
        n_a: gain_a / 2.0,
        n_b: gain_b / 2.0,
        status_quo: (0.0, 0.0),
        realized_action,
    })
}
