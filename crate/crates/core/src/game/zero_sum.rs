use serde::{Deserialize, Serialize};

use super::JointAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZeroSumStrategy {
    /// Saddle point; both players play the indicated row/column.
    Pure(JointAction),
    /// `p` is the row player's weight on row 1, `q` the column player's
    /// weight on column 1.
    Mixed { p: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroSumSolution {
    pub value: f64,
    pub strategy: ZeroSumStrategy,
}

impl ZeroSumSolution {
    /// Row player's probability of row 1.
    pub fn p(&self) -> f64 {
        match self.strategy {
            ZeroSumStrategy::Pure(a) => (a.row == 1) as u8 as f64,
            ZeroSumStrategy::Mixed { p, .. } => p,
        }
    }

    /// Column player's probability of column 1.
    pub fn q(&self) -> f64 {
        match self.strategy {
            ZeroSumStrategy::Pure(a) => (a.col == 1) as u8 as f64,
            ZeroSumStrategy::Mixed { q, .. } => q,
        }
    }
}

/// Value of the 2×2 zero-sum game `d`, row player maximizing.
///
/// A saddle point is reported when the pure maximin equals the pure minimax;
/// otherwise the equalizing mixed strategies are returned.
pub fn solve_zero_sum_2x2(d: &[[f64; 2]; 2]) -> ZeroSumSolution {
    let row_min = |i: usize| d[i][0].min(d[i][1]);
    let col_max = |j: usize| d[0][j].max(d[1][j]);

    // first index wins ties
    let best_row = if row_min(1) > row_min(0) { 1 } else { 0 };
    let maximin = row_min(best_row);
    let minimax = col_max(0).min(col_max(1));

    if maximin == minimax {
        let best_col = if d[best_row][1] < d[best_row][0] { 1 } else { 0 };
        return ZeroSumSolution {
            value: d[best_row][best_col],
            strategy: ZeroSumStrategy::Pure(JointAction::new(best_row as u8 + 1, best_col as u8 + 1)),
        };
    }

    let den = (d[0][0] - d[0][1]) + (d[1][1] - d[1][0]);
    assert!(
        den != 0.0,
        "2x2 game without saddle point has a zero denominator: {d:?}"
    );
    let value = (d[0][0] * d[1][1] - d[0][1] * d[1][0]) / den;
    let p = (d[1][1] - d[1][0]) / den;
    let q = (d[1][1] - d[0][1]) / den;
    ZeroSumSolution {
        value,
        strategy: ZeroSumStrategy::Mixed { p, q },
    }
}
