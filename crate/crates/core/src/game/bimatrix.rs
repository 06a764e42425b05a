use serde::{Deserialize, Serialize};

use super::{GameError, JointAction};

/// Crash penalty used when none is configured.
pub const DEFAULT_CRASH_PENALTY: f64 = 1.0e6;

/// Paired 2×2 payoff tables in dollars. Rows are A's actions, columns B's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimatrixGame {
    a: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
    m: f64,
}

impl BimatrixGame {
    /// Arbitrary finite game. `m` is carried along as the crash penalty but
    /// is not checked against the tables.
    pub fn new(a: [[f64; 2]; 2], b: [[f64; 2]; 2], m: f64) -> Result<Self, GameError> {
        if a.iter().chain(b.iter()).flatten().any(|x| !x.is_finite()) || !m.is_finite() {
            return Err(GameError::NonFinite("payoff tables"));
        }
        Ok(BimatrixGame { a, b, m })
    }

    pub fn a(&self) -> &[[f64; 2]; 2] {
        &self.a
    }

    pub fn b(&self) -> &[[f64; 2]; 2] {
        &self.b
    }

    pub fn crash_penalty(&self) -> f64 {
        self.m
    }

    pub fn a_at(&self, action: JointAction) -> f64 {
        let (i, j) = action.index();
        self.a[i][j]
    }

    pub fn b_at(&self, action: JointAction) -> f64 {
        let (i, j) = action.index();
        self.b[i][j]
    }

    pub fn total_at(&self, action: JointAction) -> f64 {
        self.a_at(action) + self.b_at(action)
    }

    /// A − B, the zero-sum game the threat strategies are chosen from.
    pub fn difference(&self) -> [[f64; 2]; 2] {
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = self.a[i][j] - self.b[i][j];
            }
        }
        d
    }

    /// Both tables multiplied by `lambda`; the crash penalty scales too.
    pub fn scaled(&self, lambda: f64) -> Result<Self, GameError> {
        let mut a = self.a;
        let mut b = self.b;
        a.iter_mut().flatten().for_each(|x| *x *= lambda);
        b.iter_mut().flatten().for_each(|x| *x *= lambda);
        BimatrixGame::new(a, b, self.m * lambda)
    }

    /// Checks the lane-change structure: crash cell at −m for both, zero
    /// where a player ends at its lower speed, nonnegative gains elsewhere,
    /// and m dominating the tradable utility.
    pub fn check_lane_change_structure(&self) -> Result<(), GameError> {
        let (a, b, m) = (&self.a, &self.b, self.m);
        if a[0][0] != -m || b[0][0] != -m {
            return Err(GameError::NotLaneChangeGame("crash cell must be (-M, -M)"));
        }
        if a[1][0] != 0.0 || a[1][1] != 0.0 {
            return Err(GameError::NotLaneChangeGame("A earns nothing when staying"));
        }
        if b[0][1] != 0.0 || b[1][1] != 0.0 {
            return Err(GameError::NotLaneChangeGame("B earns nothing when giving way"));
        }
        if a[0][1] < 0.0 || b[1][0] < 0.0 {
            return Err(GameError::NotLaneChangeGame("gains must be nonnegative"));
        }
        if m <= a[0][1] + b[1][0] {
            return Err(GameError::PenaltyTooSmall {
                m,
                tradable: a[0][1] + b[1][0],
            });
        }
        Ok(())
    }

    /// A's gain from changing lanes while B gives way.
    pub fn gain_a(&self) -> f64 {
        self.a[0][1]
    }

    /// B's gain from keeping its lane while A stays.
    pub fn gain_b(&self) -> f64 {
        self.b[1][0]
    }
}

/// Payoff tables for a lane-change conflict. VOT rates are dollars per second.
pub fn build_utility_matrix(
    cvot_a: f64,
    td_a: f64,
    cvot_b: f64,
    td_b: f64,
    m: f64,
) -> Result<BimatrixGame, GameError> {
    for (name, value) in [
        ("cvot_a", cvot_a),
        ("td_a", td_a),
        ("cvot_b", cvot_b),
        ("td_b", td_b),
    ] {
        if !value.is_finite() {
            return Err(GameError::NonFinite(name));
        }
        if value < 0.0 {
            return Err(GameError::Negative { name, value });
        }
    }
    let gain_a = cvot_a * td_a;
    let gain_b = cvot_b * td_b;
    if !(m > gain_a + gain_b) {
        return Err(GameError::PenaltyTooSmall {
            m,
            tradable: gain_a + gain_b,
        });
    }
    BimatrixGame::new([[-m, gain_a], [0.0, 0.0]], [[-m, 0.0], [gain_b, 0.0]], m)
}
