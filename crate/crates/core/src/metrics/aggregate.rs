use serde::{Deserialize, Serialize};

use crate::sim::VehicleClass;

/// Per-step occupancy and speed totals by class, recorded after the move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub count: [u32; 3],
    /// Sum of speeds in cells/step.
    pub speed_sum: [u64; 3],
    pub lane_changes: u32,
    pub games: u32,
}

impl StepStats {
    pub fn total_count(&self) -> u32 {
        self.count.iter().sum()
    }

    pub fn total_speed(&self) -> u64 {
        self.speed_sum.iter().sum()
    }
}

/// Which vehicles a speed-density row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    All,
    TvHigh,
    TvLow,
    Ntv,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [ClassLabel::All, ClassLabel::TvHigh, ClassLabel::TvLow, ClassLabel::Ntv];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::All => "all",
            ClassLabel::TvHigh => "tv_high",
            ClassLabel::TvLow => "tv_low",
            ClassLabel::Ntv => "ntv",
        }
    }

    pub fn class(self) -> Option<VehicleClass> {
        match self {
            ClassLabel::All => None,
            ClassLabel::TvHigh => Some(VehicleClass::TvHigh),
            ClassLabel::TvLow => Some(VehicleClass::TvLow),
            ClassLabel::Ntv => Some(VehicleClass::Ntv),
        }
    }
}

impl From<VehicleClass> for ClassLabel {
    fn from(c: VehicleClass) -> Self {
        match c {
            VehicleClass::TvHigh => ClassLabel::TvHigh,
            VehicleClass::TvLow => ClassLabel::TvLow,
            VehicleClass::Ntv => ClassLabel::Ntv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedDensityRow {
    pub density_veh_km: f64,
    pub class: ClassLabel,
    pub mean_speed_kmh: f64,
}

/// Vehicle-step averaged speed per class over steps `>= measure_from`.
/// Classes never observed produce no row.
pub fn speed_density_aggregate(
    history: &[StepStats],
    density_veh_km: f64,
    measure_from: u64,
    kmh_per_cell_step: f64,
) -> Vec<SpeedDensityRow> {
    let mut count = [0u64; 3];
    let mut sum = [0u64; 3];
    for s in history.iter().filter(|s| s.step >= measure_from) {
        for c in 0..3 {
            count[c] += s.count[c] as u64;
            sum[c] += s.speed_sum[c];
        }
    }
    let mut rows = Vec::new();
    for label in ClassLabel::ALL {
        let (n, v) = match label.class() {
            None => (count.iter().sum::<u64>(), sum.iter().sum::<u64>()),
            Some(c) => (count[c.index()], sum[c.index()]),
        };
        if n > 0 {
            rows.push(SpeedDensityRow {
                density_veh_km,
                class: label,
                mean_speed_kmh: v as f64 / n as f64 * kmh_per_cell_step,
            });
        }
    }
    rows
}

/// One vehicle observation for space-time binning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub step: u64,
    pub vehicle: u32,
    pub lane: u8,
    pub cell: u32,
    pub speed: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub n_cells: u32,
    pub start_step: u64,
    pub n_steps: u64,
    pub time_bin: u64,
    pub space_bin: u32,
}

impl HeatmapSpec {
    pub fn rows(&self) -> usize {
        self.n_steps.div_ceil(self.time_bin) as usize
    }

    pub fn cols(&self) -> usize {
        self.n_cells.div_ceil(self.space_bin) as usize
    }
}

/// Space-time grid of mean speed (cells/step), both lanes pooled.
/// Rows are time bins, columns are space bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub spec: HeatmapSpec,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Heatmap {
    pub fn new(spec: HeatmapSpec) -> Self {
        assert!(spec.time_bin > 0 && spec.space_bin > 0, "heatmap bins must be positive");
        let n = spec.rows() * spec.cols();
        Heatmap {
            spec,
            sum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.spec.rows()
    }

    pub fn cols(&self) -> usize {
        self.spec.cols()
    }

    pub fn add(&mut self, s: &TrajectorySample) {
        if s.step < self.spec.start_step || s.cell >= self.spec.n_cells {
            return;
        }
        let r = ((s.step - self.spec.start_step) / self.spec.time_bin) as usize;
        if r >= self.rows() {
            return;
        }
        let c = (s.cell / self.spec.space_bin) as usize;
        let k = r * self.cols() + c;
        self.sum[k] += s.speed as f64;
        self.count[k] += 1;
    }

    /// Mean speed in a bin, `None` for empty bins.
    pub fn mean(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.cols() + col;
        (self.count[k] > 0).then(|| self.sum[k] / self.count[k] as f64)
    }

    pub fn count(&self, row: usize, col: usize) -> u32 {
        self.count[row * self.cols() + col]
    }

    pub fn is_empty(&self) -> bool {
        self.count.iter().all(|&c| c == 0)
    }
}

pub fn heatmap_accumulate<I>(samples: I, spec: HeatmapSpec) -> Heatmap
where
    I: IntoIterator<Item = TrajectorySample>,
{
    let mut h = Heatmap::new(spec);
    for s in samples {
        h.add(&s);
    }
    h
}

/// A low-speed band followed across consecutive time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTrack {
    pub first_row: usize,
    /// Unwrapped centroid (in space bins) for each row of the track.
    pub centroids: Vec<f64>,
    /// Least-squares slope in space bins per time bin.
    pub slope: f64,
}

impl BandTrack {
    /// Slope converted to cells per step.
    pub fn speed_cells_per_step(&self, spec: &HeatmapSpec) -> f64 {
        self.slope * spec.space_bin as f64 / spec.time_bin as f64
    }
}

/// Follows low-speed bands (mean speed below `threshold`) through the
/// heatmap, treating space as periodic, and regresses each band's centroid
/// on time. Tracks shorter than `min_rows` are dropped.
pub fn band_tracks(h: &Heatmap, threshold: f64, max_jump: f64, min_rows: usize) -> Vec<BandTrack> {
    let cols = h.cols();
    let width = cols as f64;
    struct Open {
        first_row: usize,
        centroids: Vec<f64>,
    }
    let mut open: Vec<Open> = Vec::new();
    let mut done: Vec<Open> = Vec::new();

    for r in 0..h.rows() {
        let low: Vec<bool> = (0..cols).map(|c| h.mean(r, c).is_some_and(|v| v < threshold)).collect();
        let segments = periodic_segments(&low);
        let mut used = vec![false; segments.len()];
        let mut next_open = Vec::new();
        for mut track in open.drain(..) {
            let last = *track.centroids.last().unwrap();
            let wrapped = last.rem_euclid(width);
            let best = segments
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, &c)| {
                    let mut d = c - wrapped;
                    if d > width / 2.0 {
                        d -= width;
                    } else if d < -width / 2.0 {
                        d += width;
                    }
                    (i, d)
                })
                .filter(|(_, d)| d.abs() <= max_jump)
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            match best {
                Some((i, d)) => {
                    used[i] = true;
                    track.centroids.push(last + d);
                    next_open.push(track);
                }
                None => done.push(track),
            }
        }
        for (i, &c) in segments.iter().enumerate() {
            if !used[i] {
                next_open.push(Open {
                    first_row: r,
                    centroids: vec![c],
                });
            }
        }
        open = next_open;
    }
    done.extend(open);

    done.into_iter()
        .filter(|t| t.centroids.len() >= min_rows.max(2))
        .map(|t| {
            let slope = regression_slope(&t.centroids);
            BandTrack {
                first_row: t.first_row,
                centroids: t.centroids,
                slope,
            }
        })
        .collect()
}

/// Centroids of runs of `true`, joining a run that wraps past the end.
fn periodic_segments(low: &[bool]) -> Vec<f64> {
    let n = low.len();
    if n == 0 || low.iter().all(|&b| !b) {
        return Vec::new();
    }
    if low.iter().all(|&b| b) {
        return vec![(n as f64 - 1.0) / 2.0];
    }
    // start scanning just after a gap so no run is split
    let start = (0..n).find(|&i| !low[i]).unwrap();
    let mut out = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    for k in 1..=n {
        let i = (start + k) % n;
        if low[i] {
            // unwrap so the run is contiguous
            run.push(start + k);
        } else if !run.is_empty() {
            let mean = run.iter().sum::<usize>() as f64 / run.len() as f64;
            out.push(mean.rem_euclid(n as f64));
            run.clear();
        }
    }
    if !run.is_empty() {
        let mean = run.iter().sum::<usize>() as f64 / run.len() as f64;
        out.push(mean.rem_euclid(n as f64));
    }
    out
}

fn regression_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
