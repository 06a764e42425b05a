use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use lanetrade::experiments::{calibrate, run_shockwave, run_sweep, run_vip, summarize, GridPoint, Preset};
use lanetrade::game::{
    build_utility_matrix, solve_ntu, solve_tu, time_difference, BimatrixGame, SpeedScenario, DEFAULT_CRASH_PENALTY,
};
use lanetrade::io::{
    trajectory_rows, write_calibration, write_ledger, write_shockwave, write_sweep_tables, write_vip, Entry, Manifest,
    RunConfig, RunTables, Table, TRAJECTORY_HEADER,
};
use lanetrade::sim::Simulation;

#[derive(Parser)]
#[command(name = "lanetrade", version, about = "Lane-change games on a two-lane cellular automaton")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct IoArgs {
    /// Config file (`key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Two-vehicle worked example, checked against reference values.
    Example {
        /// Force both time differences to zero.
        #[arg(long)]
        zero_td: bool,
        /// Give A the high VOT and B the low one.
        #[arg(long)]
        swap_vot: bool,
    },
    /// Solve one lane-change game.
    Solve {
        #[arg(value_enum)]
        kind: Kind,
        /// A's payoffs, row-major: a11,a12,a21,a22.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<f64>,
        /// B's payoffs, row-major: b11,b12,b21,b22.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_CRASH_PENALTY)]
        m: f64,
        /// Seed for the NTU coin.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// One simulation: trajectory, ledger and summary tables.
    Run {
        #[command(flatten)]
        io: IoArgs,
    },
    /// A parameter sweep over the scenario grid.
    Sweep {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `scenario.preset`.
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Density to equilibrium-speed table from runs without transactions.
    Calibrate {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-run a manifest and compare every artifact hash.
    Replay {
        manifest: PathBuf,
        /// Where to write the fresh outputs.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tu,
    Ntu,
}

enum Failure {
    Config(String),
    Golden(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Golden(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Golden(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Example { zero_td, swap_vot } => cmd_example(zero_td, swap_vot),
        Cmd::Solve { kind, a, b, m, seed } => cmd_solve(kind, &a, &b, m, seed),
        Cmd::Run { io } => load(&io, None).and_then(|cfg| cmd_run(&cfg, &io.out)),
        Cmd::Sweep { io, jobs, preset } => load(&io, preset).and_then(|cfg| cmd_sweep(&cfg, &io.out, jobs)),
        Cmd::Calibrate { io, jobs } => load(&io, None).and_then(|cfg| cmd_calibrate(&cfg, &io.out, jobs)),
        Cmd::Replay { manifest, out } => cmd_replay(&manifest, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// File, then environment, then command-line flags.
fn load(io: &IoArgs, preset: Option<Preset>) -> Result<RunConfig, Failure> {
    let text = match &io.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut entries = lanetrade::io::parse_entries(&text).map_err(|e| Failure::Config(e.to_string()))?;
    entries.extend(lanetrade::io::env_entries(std::env::vars()));
    let flag = |key: &str, value: String| Entry {
        line: None,
        key: key.into(),
        value,
    };
    if let Some(s) = io.seed {
        entries.push(flag("sim.seed", s.to_string()));
    }
    if let Some(p) = preset {
        entries.push(flag("scenario.preset", p.to_string()));
    }
    RunConfig::from_entries(&entries).map_err(|e| Failure::Config(e.to_string()))
}

struct Golden {
    name: &'static str,
    got: f64,
    want: f64,
    tol: f64,
}

fn cmd_example(zero_td: bool, swap_vot: bool) -> Result<(), Failure> {
    let sa = SpeedScenario::from_kmh(55.0, 25.0, 31.0, 3.0, -4.0, 1.0);
    let sb = SpeedScenario::from_kmh(52.0, 45.0, 38.0, 3.0, -3.0, -1.0);
    let (mut td_a, mut td_b) = (time_difference(&sa).map_err(runtime)?, time_difference(&sb).map_err(runtime)?);
    if zero_td {
        (td_a, td_b) = (0.0, 0.0);
    }
    let (vot_a, vot_b) = if swap_vot { (25.0, 10.0) } else { (10.0, 25.0) };
    let g = build_utility_matrix(vot_a / 3600.0, td_a, vot_b / 3600.0, td_b, DEFAULT_CRASH_PENALTY).map_err(runtime)?;
    let out = solve_tu(&g);

    println!("t_d^A = {td_a:.4} s");
    println!("t_d^B = {td_b:.4} s");
    print_matrices(&g);
    println!("omega* = {:.6}", out.omega_star);
    println!("(i*, j*) = {}", out.action);
    println!("sigma = {:+.6}", out.sigma);
    println!("payoffs = ({:.6}, {:.6})", out.payoff_a, out.payoff_b);

    if zero_td || swap_vot {
        return Ok(());
    }
    let checks = [
        Golden { name: "t_d^A", got: td_a, want: 2.26, tol: 5e-3 },
        Golden { name: "t_d^B", got: td_b, want: 0.34, tol: 5e-3 },
        Golden { name: "A_12", got: g.a()[0][1], want: 0.0062, tol: 1e-4 },
        Golden { name: "B_21", got: g.b()[1][0], want: 0.0023, tol: 1e-4 },
        Golden { name: "sigma", got: out.sigma, want: 0.0031, tol: 5e-5 },
        Golden { name: "payoff_a", got: out.payoff_a, want: 0.0031, tol: 5e-5 },
        Golden { name: "payoff_b", got: out.payoff_b, want: 0.0031, tol: 5e-5 },
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| (c.got - c.want).abs() > c.tol)
        .map(|c| format!("{}: got {:.6}, want {} ± {}", c.name, c.got, c.want, c.tol))
        .collect();
    if bad.is_empty() {
        println!("golden values: ok");
        Ok(())
    } else {
        Err(Failure::Golden(bad.join("\n")))
    }
}

fn print_matrices(g: &BimatrixGame) {
    for i in 0..2 {
        let cells: Vec<String> = (0..2).map(|j| format!("({:>10.6}, {:>10.6})", g.a()[i][j], g.b()[i][j])).collect();
        println!("  {}", cells.join("  "));
    }
}

fn matrix(v: &[f64], name: &str) -> Result<[[f64; 2]; 2], Failure> {
    match v {
        [a, b, c, d] => Ok([[*a, *b], [*c, *d]]),
        _ => Err(Failure::Config(format!("--{name} needs four comma-separated entries"))),
    }
}

fn cmd_solve(kind: Kind, a: &[f64], b: &[f64], m: f64, seed: u64) -> Result<(), Failure> {
    let g = BimatrixGame::new(matrix(a, "a")?, matrix(b, "b")?, m).map_err(|e| Failure::Config(e.to_string()))?;
    print_matrices(&g);
    match kind {
        Kind::Tu => {
            let out = solve_tu(&g);
            println!("omega* = {}", out.omega_star);
            println!("(i*, j*) = {}", out.action);
            println!("sigma = {}", out.sigma);
            println!("payoffs = ({}, {})", out.payoff_a, out.payoff_b);
            println!("theta = {}", out.theta);
            println!("threat = ({}, {})", out.threat.0, out.threat.1);
        }
        Kind::Ntu => {
            let mut coin = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let out = solve_ntu(&g, &mut coin).map_err(|e| Failure::Config(e.to_string()))?;
            println!("nash point = ({}, {})", out.n_a, out.n_b);
            println!("status quo = ({}, {})", out.status_quo.0, out.status_quo.1);
            println!("realized = {}", out.realized_action);
        }
    }
    Ok(())
}

fn prepare(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))
}

fn finish(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    jobs: usize,
    seeds: Vec<u64>,
    files: Vec<PathBuf>,
    started: Instant,
) -> Result<(), Failure> {
    let artifacts = files
        .iter()
        .map(|f| Manifest::artifact(out, f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        preset: (command == "sweep").then(|| cfg.scenario.preset.to_string()),
        jobs,
        config: cfg.to_text(),
        seeds,
        artifacts,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let path = manifest.write(out).map_err(runtime)?;
    println!("wrote {} files, manifest {}", manifest.artifacts.len(), path.display());
    Ok(())
}

fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let started = Instant::now();
    prepare(out)?;
    let mut sim = Simulation::new(cfg.sim.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    let mut files = Vec::new();
    if cfg.trajectory {
        let mut t = Table::create(&out.join("trajectory.csv"), &TRAJECTORY_HEADER).map_err(runtime)?;
        let mut err = None;
        sim.run_observed(|lat| {
            if err.is_none() {
                err = trajectory_rows(&mut t, lat).err();
            }
        })
        .map_err(runtime)?;
        if let Some(e) = err {
            return Err(runtime(e));
        }
        files.push(t.finish().map_err(runtime)?);
    } else {
        sim.run().map_err(runtime)?;
    }
    files.push(write_ledger(&out.join("ledger.csv"), sim.ledger().records()).map_err(runtime)?);
    let s = &cfg.sim;
    let point = GridPoint {
        index: 0,
        density: s.density(),
        penetration: s.tv_penetration,
        ratio: s.high_low_ratio,
        vot_high: s.vot_high,
    };
    let summary = summarize(&sim);
    let mut tables = RunTables::create(out).map_err(runtime)?;
    tables.push(&point, s.seed, &summary).map_err(runtime)?;
    files.extend(tables.finish().map_err(runtime)?);
    println!(
        "{} steps, {} vehicles, {} games after warm-up",
        sim.lattice().step,
        sim.lattice().len(),
        summary.games
    );
    finish(out, "run", cfg, 1, vec![s.seed], files, started)
}

fn cmd_sweep(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<(), Failure> {
    let started = Instant::now();
    prepare(out)?;
    let spec = &cfg.scenario;
    let v_max = spec.base.v_max;
    let mut files = Vec::new();
    let mut complete = true;
    match spec.preset {
        Preset::ShockwaveRing => {
            let maps = run_shockwave(spec, jobs).map_err(runtime)?;
            for m in &maps {
                let back = m.backward_bands().count();
                println!(
                    "density {} penetration {}: {} bands, {} moving upstream",
                    m.density,
                    m.penetration,
                    m.bands.len(),
                    back
                );
            }
            files.extend(write_shockwave(out, &maps, v_max).map_err(runtime)?);
        }
        Preset::Vip => {
            let (sweep, rows) = run_vip(spec, jobs).map_err(runtime)?;
            complete = sweep.is_complete();
            files.extend(write_sweep_tables(out, &sweep).map_err(runtime)?);
            files.push(write_vip(&out.join("vip.csv"), &rows).map_err(runtime)?);
        }
        _ => {
            let sweep = run_sweep(spec, jobs).map_err(runtime)?;
            complete = sweep.is_complete();
            files.extend(write_sweep_tables(out, &sweep).map_err(runtime)?);
        }
    }
    let seeds = if spec.preset == Preset::ShockwaveRing {
        vec![spec.base.seed]
    } else {
        spec.seeds()
    };
    finish(out, "sweep", cfg, jobs, seeds, files, started)?;
    if complete {
        Ok(())
    } else {
        Err(Failure::Runtime("some runs failed; see failures.csv".into()))
    }
}

fn cmd_calibrate(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<(), Failure> {
    let started = Instant::now();
    prepare(out)?;
    let spec = &cfg.scenario;
    let base = lanetrade::sim::SimConfig {
        warmup: spec.warmup,
        steps: spec.horizon,
        ..cfg.sim.clone()
    };
    let table = calibrate(&base, &spec.densities, spec.n_seeds, jobs).map_err(runtime)?;
    let mut files = vec![write_calibration(&out.join("calibration.csv"), &table).map_err(runtime)?];
    let line: Vec<String> = table.rows.iter().map(|(d, v)| format!("{d}:{v}")).collect();
    let conf = out.join("ve_table.conf");
    std::fs::write(&conf, format!("sim.ve_table = {}\n", line.join(", "))).map_err(runtime)?;
    files.push(conf);
    finish(out, "calibrate", cfg, jobs, spec.seeds(), files, started)
}

fn cmd_replay(manifest_path: &Path, out: &Path) -> Result<(), Failure> {
    let m = Manifest::read(manifest_path).map_err(|e| Failure::Config(e.to_string()))?;
    let mut cfg = RunConfig::parse(&m.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(p) = &m.preset {
        cfg.scenario.preset = p.parse().map_err(Failure::Config)?;
    }
    match m.command.as_str() {
        "run" => cmd_run(&cfg, out)?,
        "sweep" => cmd_sweep(&cfg, out, m.jobs)?,
        "calibrate" => cmd_calibrate(&cfg, out, m.jobs)?,
        other => return Err(Failure::Config(format!("manifest has unknown command `{other}`"))),
    }
    let bad = m.mismatches(out);
    if bad.is_empty() {
        println!("replay matches {} artifacts", m.artifacts.len());
        Ok(())
    } else {
        Err(Failure::Golden(format!(
            "{} of {} artifacts differ: {}",
            bad.len(),
            m.artifacts.len(),
            bad.join(", ")
        )))
    }
}
