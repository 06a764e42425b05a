//! Configuration text and output files.

mod config;
mod output;

pub use config::{env_entries, parse_entries, ConfigError, Entry, RunConfig, ENV_PREFIX};
pub use output::{
    fmt_f64, gray_level, sha256_file, trajectory_rows, write_calibration, write_heatmap, write_ledger,
    write_shockwave, write_sweep_tables, write_vip, Artifact, Manifest, OutputError, RunTables, Table,
    MANIFEST_NAME, SPEED_DENSITY_HEADER, TRAJECTORY_HEADER,
};
