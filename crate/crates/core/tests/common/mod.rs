//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Maximin of the row player over a 1e-3 grid on p, then the same grid
/// spacing again, relative, around the best coarse point.
pub fn grid_maximin(d: &[[f64; 2]; 2]) -> f64 {
    let f = |p: f64| {
        let c0 = p * d[0][0] + (1.0 - p) * d[1][0];
        let c1 = p * d[0][1] + (1.0 - p) * d[1][1];
        c0.min(c1)
    };
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=1000 {
        let p = k as f64 * 1e-3;
        let v = f(p);
        if v > best.1 {
            best = (p, v);
        }
    }
    let lo = (best.0 - 1e-3).max(0.0);
    for k in 0..=2000 {
        let p = (lo + k as f64 * 1e-6).min(1.0);
        best.1 = best.1.max(f(p));
    }
    best.1
}

/// Nash bargaining point by brute force along the Pareto edge between
/// `(a12, 0)` and `(0, b21)`, from the `(0, 0)` status quo.
pub fn nash_product_grid(a12: f64, b21: f64) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for k in 0..=10_000 {
        let t = k as f64 / 10_000.0;
        let (u, v) = (t * a12, (1.0 - t) * b21);
        if u * v > best.0 {
            best = (u * v, u, v);
        }
    }
    (best.1, best.2)
}

/// Position difference of the two speed profiles, stepped at 1 ms with the
/// midpoint rule until both have settled at `v_e`.
pub fn integrate_gain(v0: f64, v1: f64, v2: f64, v_e: f64, ta: f64, mag1: f64, mag2: f64) -> f64 {
    let profile = |v_target: f64, mag: f64, t: f64| {
        if t < ta {
            return v0 + (v_target - v0) * t / ta;
        }
        let s = t - ta;
        let dv = v_e - v_target;
        if s * mag >= dv.abs() {
            v_e
        } else {
            v_target + dv.signum() * mag * s
        }
    };
    let end = ta + (v1 - v_e).abs() / mag1 + (v2 - v_e).abs() / mag2 + 1.0;
    let h = 1e-3;
    let n = (end / h).ceil() as usize;
    let mut s = 0.0;
    for k in 0..n {
        let t = (k as f64 + 0.5) * h;
        s += (profile(v1, mag1, t) - profile(v2, mag2, t)) * h;
    }
    s
}
