use std::collections::VecDeque;

use super::{Lattice, SimConfig, VeSource, VehicleClass};
use crate::metrics::StepStats;

/// Classes with fewer vehicles than this borrow the all-vehicle mean.
pub const MIN_CLASS_SAMPLE: u32 = 5;

/// Equilibrium speeds never drop below this, in m/s.
pub const VE_FLOOR: f64 = 0.1;

/// Equilibrium speed per class, m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSpeeds(pub [f64; 3]);

impl ClassSpeeds {
    pub fn get(&self, class: VehicleClass) -> f64 {
        self.0[class.index()]
    }
}

/// Rolling window of per-step class counts and speed sums.
#[derive(Debug, Clone)]
pub struct SpeedHistory {
    window: usize,
    samples: VecDeque<([u32; 3], [u64; 3])>,
}

impl SpeedHistory {
    pub fn new(window: u32) -> Self {
        SpeedHistory {
            window: window.max(1) as usize,
            samples: VecDeque::with_capacity(window as usize + 1),
        }
    }

    pub fn record(&mut self, stats: &StepStats) {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back((stats.count, stats.speed_sum));
    }

    pub fn record_lattice(&mut self, lat: &Lattice) {
        let mut s = StepStats::default();
        for v in lat.vehicles() {
            s.count[v.class.index()] += 1;
            s.speed_sum[v.class.index()] += v.v as u64;
        }
        self.record(&s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean over samples of the per-step class mean, cells/step.
    fn class_mean(&self, class: Option<usize>) -> Option<f64> {
        let (mut acc, mut n) = (0.0, 0u32);
        for (count, sum) in &self.samples {
            let (c, s) = match class {
                Some(k) => (count[k], sum[k]),
                None => (count.iter().sum(), sum.iter().sum()),
            };
            if c > 0 {
                acc += s as f64 / c as f64;
                n += 1;
            }
        }
        (n > 0).then(|| acc / n as f64)
    }

    fn latest_count(&self, k: usize) -> u32 {
        self.samples.back().map_or(0, |(c, _)| c[k])
    }
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let i = table.partition_point(|&(d, _)| d < x);
    if i == 0 {
        return table[0].1;
    }
    if i == table.len() {
        return table[i - 1].1;
    }
    let (x0, y0) = table[i - 1];
    let (x1, y1) = table[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Per-class equilibrium speed used in time-difference estimates.
pub fn equilibrium_speeds(history: &SpeedHistory, lat: &Lattice, cfg: &SimConfig) -> ClassSpeeds {
    if let VeSource::Table(table) = &cfg.ve_source {
        let density = lat.len() as f64 / (cfg.road_km() * cfg.n_lanes as f64);
        let v = (interpolate(table, density) / 3.6).max(VE_FLOOR);
        return ClassSpeeds([v; 3]);
    }
    let to_ms = cfg.cell_length / cfg.dt;
    let all = history.class_mean(None).unwrap_or(0.0);
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let cells = if history.latest_count(k) >= MIN_CLASS_SAMPLE {
            history.class_mean(Some(k)).unwrap_or(all)
        } else {
            all
        };
        *slot = (cells * to_ms).max(VE_FLOOR);
    }
    ClassSpeeds(out)
}
