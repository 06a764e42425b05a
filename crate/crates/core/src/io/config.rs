//! Line-based `key = value` configuration.
//!
//! ```text
//! # ring road at 40 veh/km per lane
//! sim.density = 40
//! sim.p_sd = 0.3333333333
//! scenario.preset = benefit_heatmap
//! scenario.densities = 20, 40, 60
//! ```

use std::fmt::Write as _;

use crate::experiments::{Preset, ScenarioSpec};
use crate::sim::{Boundary, Population, SimConfig, SimError, UntruthfulMode, VeSource};

/// Prefix of environment variables that override config keys:
/// `LANETRADE_SIM__P_SD=0.2` sets `sim.p_sd`.
pub const ENV_PREFIX: &str = "LANETRADE_";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}key `{key}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Single-run settings; also the base of every sweep point.
    pub sim: SimConfig,
    pub scenario: ScenarioSpec,
    /// Write one row per vehicle per step in `run`.
    pub trajectory: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = ScenarioSpec::preset(Preset::BenefitHeatmap);
        RunConfig {
            sim: scenario.base.clone(),
            scenario,
            trajectory: true,
        }
    }
}

/// One `key = value` assignment with its source line (none for
/// environment overrides).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: Option<usize>,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError {
                line: Some(i + 1),
                key: line.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        out.push(Entry {
            line: Some(i + 1),
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

/// Overrides from environment variables carrying [`ENV_PREFIX`].
pub fn env_entries(vars: impl IntoIterator<Item = (String, String)>) -> Vec<Entry> {
    let mut out: Vec<Entry> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some(Entry {
                line: None,
                key: rest.to_lowercase().replace("__", "."),
                value: v,
            })
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| fail(e, format!("cannot parse `{}`", e.value)))
}

fn list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| fail(e, format!("cannot parse `{s}` as a number"))))
        .collect()
}

fn fail(e: &Entry, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: e.line,
        key: e.key.clone(),
        message: message.into(),
    }
}

fn parse_table(e: &Entry) -> Result<Vec<(f64, f64)>, ConfigError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (d, v) = pair
                .split_once(':')
                .ok_or_else(|| fail(e, format!("expected `density:speed`, got `{pair}`")))?;
            let d = d.trim().parse().map_err(|_| fail(e, format!("bad density `{d}`")))?;
            let v = v.trim().parse().map_err(|_| fail(e, format!("bad speed `{v}`")))?;
            Ok((d, v))
        })
        .collect()
}

fn apply_sim(c: &mut SimConfig, name: &str, e: &Entry) -> Result<(), ConfigError> {
    match name {
        "cell_length" => c.cell_length = num(e)?,
        "n_cells" => c.n_cells = num(e)?,
        "dt" => c.dt = num(e)?,
        "v_max" => c.v_max = num(e)?,
        "a_pos" => c.a_pos = num(e)?,
        "a_neg" => c.a_neg = num(e)?,
        "n_lanes" => c.n_lanes = num(e)?,
        "p_sd" => c.p_sd = num(e)?,
        "ta" => c.ta = num(e)?,
        "boundary" => {
            c.boundary = match e.value.as_str() {
                "ring" => Boundary::Ring,
                "open" => Boundary::Open,
                v => return Err(fail(e, format!("expected ring or open, got `{v}`"))),
            }
        }
        "inflow_rate" => c.inflow_rate = num(e)?,
        "tv_penetration" => c.tv_penetration = num(e)?,
        "vot_high" => c.vot_high = num(e)?,
        "vot_low" => c.vot_low = num(e)?,
        "high_low_ratio" => c.high_low_ratio = num(e)?,
        "untruthful_mode" => {
            c.untruthful_mode = match e.value.as_str() {
                "none" => UntruthfulMode::None,
                "high_declares_low" => UntruthfulMode::HighDeclaresLow,
                "low_declares_high" => UntruthfulMode::LowDeclaresHigh,
                v => return Err(fail(e, format!("unknown mode `{v}`"))),
            }
        }
        "seed" => c.seed = num(e)?,
        "ve_window" => c.ve_window = num(e)?,
        "ve_table" => {
            c.ve_source = if e.value.is_empty() || e.value == "trailing" {
                VeSource::Trailing
            } else {
                VeSource::Table(parse_table(e)?)
            }
        }
        "density" => c.population = Population::Density(num(e)?),
        "vehicles" => c.population = Population::Count(num(e)?),
        "steps" => c.steps = num(e)?,
        "warmup" => c.warmup = num(e)?,
        "crash_penalty" => c.crash_penalty = num(e)?,
        _ => return Err(fail(e, "unknown key")),
    }
    Ok(())
}

fn apply_scenario(s: &mut ScenarioSpec, name: &str, e: &Entry) -> Result<(), ConfigError> {
    match name {
        "densities" => s.densities = list(e)?,
        "penetrations" => s.penetrations = list(e)?,
        "ratios" => s.ratios = list(e)?,
        "vot_highs" => s.vot_highs = list(e)?,
        "n_seeds" => s.n_seeds = num(e)?,
        "warmup" => s.warmup = num(e)?,
        "horizon" => s.horizon = num(e)?,
        _ => return Err(fail(e, "unknown key")),
    }
    Ok(())
}

impl RunConfig {
    /// Applies entries on top of defaults. A `scenario.preset` entry is
    /// applied first wherever it appears, so other keys override it.
    pub fn from_entries(entries: &[Entry]) -> Result<Self, ConfigError> {
        let mut preset = Preset::BenefitHeatmap;
        for e in entries.iter().filter(|e| e.key == "scenario.preset") {
            preset = e.value.parse().map_err(|m: String| fail(e, m))?;
        }
        let mut scenario = ScenarioSpec::preset(preset);
        let mut sim = scenario.base.clone();
        let mut trajectory = true;
        for e in entries {
            let (section, name) = e.key.split_once('.').ok_or_else(|| fail(e, "expected a dotted key"))?;
            match (section, name) {
                ("scenario", "preset") => {}
                ("sim", name) => apply_sim(&mut sim, name, e)?,
                ("scenario", name) => apply_scenario(&mut scenario, name, e)?,
                ("output", "trajectory") => {
                    trajectory = e.value.parse().map_err(|_| fail(e, "expected true or false"))?;
                }
                ("output", "heatmap_time_bin") => scenario.heatmap_time_bin = num(e)?,
                ("output", "heatmap_space_bin") => scenario.heatmap_space_bin = num(e)?,
                _ => return Err(fail(e, "unknown key")),
            }
        }
        scenario.base = sim.clone();
        let cfg = RunConfig {
            sim,
            scenario,
            trajectory,
        };
        cfg.validate(entries)?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_entries(&parse_entries(text)?)
    }

    /// Parses `text`, then applies environment overrides.
    pub fn parse_with_env(text: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut entries = parse_entries(text)?;
        entries.extend(env_entries(vars));
        Self::from_entries(&entries)
    }

    fn validate(&self, entries: &[Entry]) -> Result<(), ConfigError> {
        let locate = |err: SimError, prefix: &str| match err {
            SimError::InvalidConfig { key, reason } => {
                let full = if key.contains('.') {
                    key.to_string()
                } else {
                    format!("{prefix}.{key}")
                };
                let line = entries.iter().rev().find(|e| e.key == full).and_then(|e| e.line);
                ConfigError {
                    line,
                    key: full,
                    message: reason,
                }
            }
            other => ConfigError {
                line: None,
                key: prefix.to_string(),
                message: other.to_string(),
            },
        };
        self.sim.validate().map_err(|e| locate(e, "sim"))?;
        if self.sim.boundary == Boundary::Ring {
            self.scenario.validate().map_err(|e| locate(e, "sim"))?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let c = &self.sim;
        let s = &self.scenario;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        kv("scenario.preset", s.preset.to_string());
        kv("sim.cell_length", format!("{:?}", c.cell_length));
        kv("sim.n_cells", c.n_cells.to_string());
        kv("sim.dt", format!("{:?}", c.dt));
        kv("sim.v_max", c.v_max.to_string());
        kv("sim.a_pos", c.a_pos.to_string());
        kv("sim.a_neg", c.a_neg.to_string());
        kv("sim.n_lanes", c.n_lanes.to_string());
        kv("sim.p_sd", format!("{:?}", c.p_sd));
        kv("sim.ta", format!("{:?}", c.ta));
        kv(
            "sim.boundary",
            match c.boundary {
                Boundary::Ring => "ring",
                Boundary::Open => "open",
            }
            .into(),
        );
        kv("sim.inflow_rate", format!("{:?}", c.inflow_rate));
        kv("sim.tv_penetration", format!("{:?}", c.tv_penetration));
        kv("sim.vot_high", format!("{:?}", c.vot_high));
        kv("sim.vot_low", format!("{:?}", c.vot_low));
        kv("sim.high_low_ratio", format!("{:?}", c.high_low_ratio));
        kv(
            "sim.untruthful_mode",
            match c.untruthful_mode {
                UntruthfulMode::None => "none",
                UntruthfulMode::HighDeclaresLow => "high_declares_low",
                UntruthfulMode::LowDeclaresHigh => "low_declares_high",
            }
            .into(),
        );
        kv("sim.seed", c.seed.to_string());
        kv("sim.ve_window", c.ve_window.to_string());
        kv(
            "sim.ve_table",
            match &c.ve_source {
                VeSource::Trailing => "trailing".into(),
                VeSource::Table(t) => t.iter().map(|(d, v)| format!("{d:?}:{v:?}")).collect::<Vec<_>>().join(", "),
            },
        );
        match c.population {
            Population::Density(d) => kv("sim.density", format!("{d:?}")),
            Population::Count(n) => kv("sim.vehicles", n.to_string()),
        }
        kv("sim.steps", c.steps.to_string());
        kv("sim.warmup", c.warmup.to_string());
        kv("sim.crash_penalty", format!("{:?}", c.crash_penalty));
        kv("scenario.densities", join(&s.densities));
        kv("scenario.penetrations", join(&s.penetrations));
        kv("scenario.ratios", join(&s.ratios));
        kv("scenario.vot_highs", join(&s.vot_highs));
        kv("scenario.n_seeds", s.n_seeds.to_string());
        kv("scenario.warmup", s.warmup.to_string());
        kv("scenario.horizon", s.horizon.to_string());
        kv("output.trajectory", self.trajectory.to_string());
        kv("output.heatmap_time_bin", s.heatmap_time_bin.to_string());
        kv("output.heatmap_space_bin", s.heatmap_space_bin.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# comment\nsim.p_sd = 0.25  # trailing\n\nsim.vehicles = 10\nscenario.densities = 10, 20\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.sim.p_sd, 0.25);
        assert_eq!(c.sim.population, Population::Count(10));
        assert_eq!(c.scenario.densities, vec![10.0, 20.0]);
        assert_eq!(c.scenario.base.p_sd, 0.25);
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = RunConfig::parse("sim.v_max = 5\nsim.p_sd = lots\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(2), "sim.p_sd"));
        let e = RunConfig::parse("\n\nsim.wheels = 4\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(3), "sim.wheels"));
        let e = RunConfig::parse("sim.p_sd = 2\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(1), "sim.p_sd"));
        assert!(e.to_string().starts_with("line 1: key `sim.p_sd`"));
        assert!(RunConfig::parse("just words\n").is_err());
    }

    #[test]
    fn environment_wins() {
        let vars = vec![
            ("LANETRADE_SIM__P_SD".to_string(), "0.5".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let c = RunConfig::parse_with_env("sim.p_sd = 0.1\n", vars).unwrap();
        assert_eq!(c.sim.p_sd, 0.5);
    }

    #[test]
    fn preset_applies_before_overrides() {
        let c = RunConfig::parse("sim.n_cells = 300\nscenario.preset = shockwave_ring\n").unwrap();
        assert_eq!(c.scenario.preset, Preset::ShockwaveRing);
        assert_eq!(c.sim.n_cells, 300);
        assert_eq!(c.scenario.n_seeds, 1);
    }

    #[test]
    fn table_round_trip() {
        let c = RunConfig::parse("sim.ve_table = 0:135, 60:40.5, 133.33:0\n").unwrap();
        assert_eq!(c.sim.ve_source, VeSource::Table(vec![(0.0, 135.0), (60.0, 40.5), (133.33, 0.0)]));
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
