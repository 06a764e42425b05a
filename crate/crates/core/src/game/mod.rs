//! Two-player lane-change games.
//!
//! Vehicle A (the lane changer) picks a row: 1 = change lanes, 2 = stay.
//! Vehicle B (the lag vehicle in the target lane) picks a column:
//! 1 = do not give way, 2 = give way. All money is in dollars, all times in
//! seconds, all speeds in m/s.

mod bimatrix;
mod scenario;
mod solve;
mod zero_sum;

pub use bimatrix::{build_utility_matrix, BimatrixGame, DEFAULT_CRASH_PENALTY};
pub use scenario::{time_difference, SpeedScenario};
pub use solve::{solve_ntu, solve_tu, NtuOutcome, TuOutcome};
pub use zero_sum::{solve_zero_sum_2x2, ZeroSumSolution, ZeroSumStrategy};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joint action, stored 1-based to match the row/column labels of the games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub row: u8,
    pub col: u8,
}

impl JointAction {
    pub const CRASH: JointAction = JointAction { row: 1, col: 1 };
    pub const CHANGE_GIVE_WAY: JointAction = JointAction { row: 1, col: 2 };
    pub const STAY_KEEP: JointAction = JointAction { row: 2, col: 1 };
    pub const STATUS_QUO: JointAction = JointAction { row: 2, col: 2 };

    pub fn new(row: u8, col: u8) -> Self {
        debug_assert!((1..=2).contains(&row) && (1..=2).contains(&col));
        JointAction { row, col }
    }

    /// A changes lanes.
    pub fn a_changes(self) -> bool {
        self.row == 1
    }

    /// B keeps its higher speed (does not give way).
    pub fn b_keeps(self) -> bool {
        self.col == 1
    }

    pub(crate) fn index(self) -> (usize, usize) {
        (self.row as usize - 1, self.col as usize - 1)
    }
}

impl std::fmt::Display for JointAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("equilibrium speed must be positive, got {0}")]
    NonPositiveEquilibriumSpeed(f64),
    #[error("lane-change completion time must be positive, got {0}")]
    NonPositiveManeuverTime(f64),
    #[error("acceleration {0} must be nonzero")]
    ZeroAcceleration(&'static str),
    #[error("higher speed choice {v1} is below lower speed choice {v2}")]
    SpeedOrder { v1: f64, v2: f64 },
    #[error("time difference is negative ({0}); acceleration signs are inconsistent with the speeds")]
    NegativeTimeDifference(f64),
    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("crash penalty {m} does not dominate tradable utility {tradable}")]
    PenaltyTooSmall { m: f64, tradable: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix does not have the lane-change structure: {0}")]
    NotLaneChangeGame(&'static str),
}
