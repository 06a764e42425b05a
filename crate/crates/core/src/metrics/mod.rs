//! Game accounting, the benefit index, and space-time aggregation.

mod aggregate;
mod ledger;

pub use aggregate::{
    band_tracks, heatmap_accumulate, speed_density_aggregate, BandTrack, ClassLabel, Heatmap, HeatmapSpec,
    SpeedDensityRow, StepStats, TrajectorySample,
};
pub use ledger::{Benefit, ClassFilter, GameKind, GameLedger, GameRecord, MetricsError, Trip};
