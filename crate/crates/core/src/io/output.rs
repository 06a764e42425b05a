//! CSV tables, PGM heatmaps, and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::{CalibrationTable, GridPoint, RunSummary, ShockwaveMap, SweepResult, VipRow};
use crate::metrics::{GameKind, GameRecord, Heatmap};
use crate::sim::Lattice;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shortest decimal that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Buffered CSV writer that reports the file on error.
pub struct Table {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, OutputError> {
        let mut w = csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        w.write_record(header).map_err(|source| OutputError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Table {
            path: path.to_path_buf(),
            w,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), OutputError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|source| OutputError::Csv {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<PathBuf, OutputError> {
        self.w.flush().map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["step", "id", "lane", "cell", "speed", "class"];

/// Appends the current state. `step` is the index of the update that
/// produced it; lanes are numbered from 1.
pub fn trajectory_rows(t: &mut Table, lat: &Lattice) -> Result<(), OutputError> {
    let step = lat.step.saturating_sub(1).to_string();
    let mut vs: Vec<_> = lat.vehicles().iter().collect();
    vs.sort_by_key(|v| v.id);
    for v in vs {
        t.row([
            step.as_str(),
            &v.id.to_string(),
            &(v.lane + 1).to_string(),
            &v.cell.to_string(),
            &v.v.to_string(),
            v.class.as_str(),
        ])?;
    }
    Ok(())
}

pub fn write_ledger(path: &Path, records: &[GameRecord]) -> Result<PathBuf, OutputError> {
    let mut t = Table::create(
        path,
        &[
            "step",
            "a_id",
            "b_id",
            "a_class",
            "b_class",
            "kind",
            "action_row",
            "action_col",
            "sigma",
            "joint_payoff",
            "td_a",
            "td_b",
            "dt_a",
            "dt_b",
            "cvot_a_declared",
            "cvot_a_true",
            "cvot_b_declared",
            "cvot_b_true",
        ],
    )?;
    for r in records {
        t.row([
            r.step.to_string(),
            r.a_id.to_string(),
            r.b_id.to_string(),
            r.a_class.as_str().into(),
            r.b_class.as_str().into(),
            match r.kind {
                GameKind::Tu => "tu".into(),
                GameKind::Ntu => "ntu".into(),
            },
            r.action.row.to_string(),
            r.action.col.to_string(),
            fmt_f64(r.sigma),
            fmt_f64(r.joint_payoff),
            fmt_f64(r.td_a),
            fmt_f64(r.td_b),
            fmt_f64(r.dt_a),
            fmt_f64(r.dt_b),
            fmt_f64(r.cvot_a_declared),
            fmt_f64(r.cvot_a_true),
            fmt_f64(r.cvot_b_declared),
            fmt_f64(r.cvot_b_true),
        ])?;
    }
    t.finish()
}

pub const SPEED_DENSITY_HEADER: [&str; 7] = [
    "density_veh_km",
    "class",
    "mean_speed_kmh",
    "seed",
    "penetration",
    "ratio",
    "vot_high",
];

/// `speed_density.csv` and `benefit.csv`, one block of rows per run.
pub struct RunTables {
    sd: Table,
    bf: Table,
}

impl RunTables {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        let sd = Table::create(&dir.join("speed_density.csv"), &SPEED_DENSITY_HEADER)?;
        let bf = Table::create(
            &dir.join("benefit.csv"),
            &[
                "density",
                "penetration",
                "class",
                "beta",
                "income_per_h",
                "time_saved_s_per_h",
                "seed",
                "ratio",
                "vot_high",
                "beta_relative",
            ],
        )?;
        Ok(RunTables { sd, bf })
    }

    pub fn push(&mut self, p: &GridPoint, seed: u64, sum: &RunSummary) -> Result<(), OutputError> {
        for c in &sum.classes {
            if let Some(v) = c.mean_speed_kmh {
                self.sd.row([
                    fmt_f64(p.density),
                    c.class.as_str().into(),
                    fmt_f64(v),
                    seed.to_string(),
                    fmt_f64(p.penetration),
                    fmt_f64(p.ratio),
                    fmt_f64(p.vot_high),
                ])?;
            }
            self.bf.row([
                fmt_f64(p.density),
                fmt_f64(p.penetration),
                c.class.as_str().into(),
                opt(c.beta),
                opt(c.income_per_h),
                opt(c.time_saved_s_per_h),
                seed.to_string(),
                fmt_f64(p.ratio),
                fmt_f64(p.vot_high),
                opt(c.beta_relative),
            ])?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<PathBuf>, OutputError> {
        Ok(vec![self.sd.finish()?, self.bf.finish()?])
    }
}

/// Per-seed and seed-averaged speed-density and benefit tables of a sweep.
/// Returns the written paths in a fixed order.
pub fn write_sweep_tables(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>, OutputError> {
    let mut out = Vec::new();

    let mut t = RunTables::create(dir)?;
    let mut fails = Table::create(&dir.join("failures.csv"), &["point", "seed", "error"])?;
    for run in &sweep.runs {
        match &run.outcome {
            Ok(sum) => t.push(&run.point, run.seed, sum)?,
            Err(e) => fails.row([run.point.index.to_string(), run.seed.to_string(), e.clone()])?,
        }
    }
    out.extend(t.finish()?);
    out.push(fails.finish()?);

    let mut mean = Table::create(
        &dir.join("summary_mean.csv"),
        &[
            "density",
            "penetration",
            "ratio",
            "vot_high",
            "class",
            "mean_speed_kmh",
            "beta",
            "beta_sd",
            "income_per_h",
            "time_saved_s_per_h",
            "beta_relative",
            "flow_veh_h",
            "n_seeds",
        ],
    )?;
    for p in sweep.averaged() {
        for c in &p.classes {
            mean.row([
                fmt_f64(p.point.density),
                fmt_f64(p.point.penetration),
                fmt_f64(p.point.ratio),
                fmt_f64(p.point.vot_high),
                c.class.as_str().into(),
                opt(c.mean_speed_kmh),
                opt(c.beta),
                opt(c.beta_sd),
                opt(c.income_per_h),
                opt(c.time_saved_s_per_h),
                opt(c.beta_relative),
                fmt_f64(p.flow_veh_h),
                c.seeds.to_string(),
            ])?;
        }
    }
    out.push(mean.finish()?);
    Ok(out)
}

pub fn write_vip(path: &Path, rows: &[VipRow]) -> Result<PathBuf, OutputError> {
    let mut t = Table::create(
        path,
        &["density", "vot_high", "seed", "time_saved_pct", "game_time_saved_pct"],
    )?;
    for r in rows {
        t.row([
            fmt_f64(r.density),
            fmt_f64(r.vot_high),
            r.seed.to_string(),
            opt(r.time_saved_pct),
            opt(r.game_time_saved_pct),
        ])?;
    }
    t.finish()
}

pub fn write_calibration(path: &Path, table: &CalibrationTable) -> Result<PathBuf, OutputError> {
    let mut t = Table::create(path, &["density_veh_km", "raw_speed_kmh", "ve_kmh"])?;
    for (&(d, raw), &(_, v)) in table.raw.iter().zip(&table.rows) {
        t.row([fmt_f64(d), fmt_f64(raw), fmt_f64(v)])?;
    }
    t.finish()
}

/// Gray level of a bin: 255·v/v_max, with empty bins at 255.
pub fn gray_level(mean: Option<f64>, v_max: u32) -> u8 {
    match mean {
        Some(v) => (255.0 * v / v_max as f64).round().clamp(0.0, 255.0) as u8,
        None => 255,
    }
}

/// Writes `<base>.pgm` (ASCII graymap), `<base>.mask.csv` (1 marks an empty
/// bin) and `<base>.csv` (raw bin means and counts).
pub fn write_heatmap(base: &Path, h: &Heatmap, v_max: u32) -> Result<Vec<PathBuf>, OutputError> {
    let (rows, cols) = (h.rows(), h.cols());
    let pgm = base.with_extension("pgm");
    let mut text = format!("P2\n{cols} {rows}\n255\n");
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| gray_level(h.mean(r, c), v_max).to_string()).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(&pgm, text).map_err(io_err(&pgm))?;

    let mask = base.with_extension("mask.csv");
    let mut m = String::new();
    for r in 0..rows {
        let line: Vec<&str> = (0..cols).map(|c| if h.count(r, c) == 0 { "1" } else { "0" }).collect();
        m.push_str(&line.join(","));
        m.push('\n');
    }
    fs::write(&mask, m).map_err(io_err(&mask))?;

    let raw = base.with_extension("csv");
    let mut t = Table::create(&raw, &["time_bin", "space_bin", "mean_speed", "count"])?;
    for r in 0..rows {
        for c in 0..cols {
            t.row([r.to_string(), c.to_string(), opt(h.mean(r, c)), h.count(r, c).to_string()])?;
        }
    }
    Ok(vec![pgm, mask, t.finish()?])
}

/// Heatmaps plus a band summary for the shock-wave study.
pub fn write_shockwave(dir: &Path, maps: &[ShockwaveMap], v_max: u32) -> Result<Vec<PathBuf>, OutputError> {
    let mut out = Vec::new();
    let mut bands = Table::create(
        &dir.join("bands.csv"),
        &["density", "penetration", "first_row", "rows", "slope_cells_per_step"],
    )?;
    for m in maps {
        let kind = if m.penetration >= 1.0 {
            "tv".to_string()
        } else if m.penetration <= 0.0 {
            "ntv".to_string()
        } else {
            format!("pen{}", fmt_f64(m.penetration))
        };
        let base = dir.join(format!("heatmap_{}_{kind}", fmt_f64(m.density)));
        out.extend(write_heatmap(&base, &m.heatmap, v_max)?);
        for b in &m.bands {
            bands.row([
                fmt_f64(m.density),
                fmt_f64(m.penetration),
                b.first_row.to_string(),
                b.centroids.len().to_string(),
                fmt_f64(b.speed_cells_per_step(&m.heatmap.spec)),
            ])?;
        }
    }
    out.push(bands.finish()?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Preset name for sweeps.
    pub preset: Option<String>,
    pub jobs: usize,
    pub config: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_s: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String, OutputError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn artifact(dir: &Path, path: &Path) -> Result<Artifact, OutputError> {
        let rel = path.strip_prefix(dir).unwrap_or(path);
        Ok(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: sha256_file(path)?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, OutputError> {
        let path = dir.join(MANIFEST_NAME);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, OutputError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Artifacts in `dir` whose hash differs from the manifest (or which
    /// are missing).
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| sha256_file(&dir.join(&a.path)).map_or(true, |h| h != a.sha256))
            .map(|a| a.path.clone())
            .collect()
    }
}
