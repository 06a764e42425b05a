//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use lanetrade::experiments::{run_shockwave, run_sweep, AveragedPoint, Preset, ScenarioSpec, SweepResult};
use lanetrade::game::{
    build_utility_matrix, solve_ntu, solve_tu, solve_zero_sum_2x2, time_difference, BimatrixGame, JointAction,
    SpeedScenario,
};
use lanetrade::io::{trajectory_rows, write_ledger, write_sweep_tables, RunTables, Table, TRAJECTORY_HEADER};
use lanetrade::metrics::{ClassLabel, GameKind};
use lanetrade::sim::{Population, SimConfig, Simulation, UntruthfulMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{grid_maximin, integrate_gain, nash_product_grid};

const M: f64 = 1.0e6;
const FREE_FLOW_KMH: f64 = 135.0;
const SWEEP_BUDGET: Duration = Duration::from_secs(600);

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: u32, name: &'static str, failures: Vec<String>, summary: String) -> Verdict {
    let pass = failures.is_empty();
    let detail = if pass {
        summary
    } else {
        format!("{summary}; {}", failures.join("; "))
    };
    Verdict { id, name, pass, detail }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn lane_game(a12: f64, b21: f64) -> BimatrixGame {
    BimatrixGame::new([[-M, a12], [0.0, 0.0]], [[-M, 0.0], [b21, 0.0]], M).unwrap()
}

fn worked_example() -> Verdict {
    let sa = SpeedScenario::from_kmh(55.0, 25.0, 31.0, 3.0, -4.0, 1.0);
    let sb = SpeedScenario::from_kmh(52.0, 45.0, 38.0, 3.0, -3.0, -1.0);
    let td_a = time_difference(&sa).unwrap();
    let td_b = time_difference(&sb).unwrap();
    let g = build_utility_matrix(10.0 / 3600.0, td_a, 25.0 / 3600.0, td_b, M).unwrap();
    let out = solve_tu(&g);
    let checks = [
        ("t_d^A", td_a, 2.26, 5e-3),
        ("t_d^B", td_b, 0.34, 5e-3),
        ("A12", g.gain_a(), 0.0062, 1e-4),
        ("B21", g.gain_b(), 0.0023, 1e-4),
        ("sigma", out.sigma, 0.0031, 5e-5),
        ("payoff A", out.payoff_a, 0.0031, 5e-5),
        ("payoff B", out.payoff_b, 0.0031, 5e-5),
    ];
    let mut failures: Vec<String> = checks
        .iter()
        .filter(|(_, got, want, tol)| (got - want).abs() > *tol)
        .map(|(n, got, want, tol)| format!("{n} = {got:.6}, want {want} ± {tol}"))
        .collect();
    if out.action != JointAction::CHANGE_GIVE_WAY {
        failures.push(format!("action {}", out.action));
    }
    verdict(
        1,
        "worked example",
        failures,
        format!("t_d = ({td_a:.4}, {td_b:.4}) s, sigma = {:.6}", out.sigma),
    )
}

fn solver_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut failures = Vec::new();
    let mut worst_zs: f64 = 0.0;
    for _ in 0..1000 {
        let mut d = [[0.0; 2]; 2];
        d.iter_mut().flatten().for_each(|x| *x = rng.gen_range(-10.0..10.0));
        let err = (solve_zero_sum_2x2(&d).value - grid_maximin(&d)).abs();
        worst_zs = worst_zs.max(err);
    }
    if worst_zs >= 1e-3 {
        failures.push(format!("zero-sum error {worst_zs:.2e}"));
    }
    let mut worst_ntu: f64 = 0.0;
    for _ in 0..100 {
        let (a12, b21) = (rng.gen_range(1e-4..0.05), rng.gen_range(1e-4..0.05));
        let out = solve_ntu(&lane_game(a12, b21), &mut rng).unwrap();
        let (u, v) = nash_product_grid(a12, b21);
        worst_ntu = worst_ntu.max((out.n_a - u).abs()).max((out.n_b - v).abs());
    }
    if worst_ntu >= 1e-6 {
        failures.push(format!("bargaining error {worst_ntu:.2e}"));
    }
    verdict(
        2,
        "solver oracles",
        failures,
        format!("max zero-sum error {worst_zs:.2e} (1000 tables), max bargaining error {worst_ntu:.2e} (100 games)"),
    )
}

fn tu_structure() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7u64);
    let mut failures = Vec::new();
    for k in 0..1000 {
        let zero = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..0.05) };
        let (a12, b21) = (zero(&mut rng), zero(&mut rng));
        let g = lane_game(a12, b21);
        let out = solve_tu(&g);
        let half = out.omega_star / 2.0;
        let from_b = -(g.b_at(out.action) - half);
        let sign_ok = match a12.partial_cmp(&b21).unwrap() {
            std::cmp::Ordering::Greater => out.sigma > 0.0,
            std::cmp::Ordering::Less => out.sigma < 0.0,
            std::cmp::Ordering::Equal => out.sigma == 0.0,
        };
        let lambda = rng.gen_range(0.01..100.0);
        let scaled = solve_tu(&g.scaled(lambda).unwrap());
        let ok = out.theta == 0.0
            && out.payoff_a == half
            && out.payoff_b == half
            && out.action != JointAction::CRASH
            && (out.sigma - from_b).abs() <= 1e-15
            && sign_ok
            && scaled.action == out.action
            && (scaled.sigma - lambda * out.sigma).abs() <= 1e-12 * (1.0 + lambda * out.sigma.abs());
        if !ok {
            failures.push(format!("case {k}: gains ({a12}, {b21}) -> {out:?}"));
            break;
        }
    }
    verdict(3, "TU structure", failures, "1000 random lane-change games".into())
}

fn time_difference_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7d);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut v = [rng.gen_range(0.5..38.0), rng.gen_range(0.5..38.0), rng.gen_range(0.5..38.0)];
        v.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let (v1, v2, v_e) = match rng.gen_range(0..3) {
            0 => (v[0], v[2], v[1]),
            1 => (v[0], v[1], v[2]),
            _ => (v[1], v[2], v[0]),
        };
        let v0 = rng.gen_range(0.0..35.0);
        let ta = rng.gen_range(0.5..5.0);
        let (m1, m2) = (rng.gen_range(0.5..5.0), rng.gen_range(0.5..5.0));
        let s = SpeedScenario {
            v0,
            v1,
            v2,
            v_e,
            ta,
            a1: if v_e >= v1 { m1 } else { -m1 },
            a2: if v_e >= v2 { m2 } else { -m2 },
        };
        let numeric = integrate_gain(v0, v1, v2, v_e, ta, m1, m2) / v_e;
        let closed = match time_difference(&s) {
            Ok(td) => td,
            // negative gains are rejected by the model; compare the raw value
            Err(_) => s.distance_gain() / v_e,
        };
        worst = worst.max((closed - numeric).abs());
    }
    let failures = if worst < 1e-3 {
        vec![]
    } else {
        vec![format!("max error {worst:.2e} s")]
    };
    verdict(4, "time difference vs integrator", failures, format!("200 scenarios, max error {worst:.2e} s"))
}

fn speed(p: &AveragedPoint, label: ClassLabel) -> f64 {
    p.class(label).mean_speed_kmh.unwrap_or(f64::NAN)
}

/// Per-seed values of one grid point.
fn per_seed(sweep: &SweepResult, index: usize, f: impl Fn(&lanetrade::experiments::RunSummary) -> f64) -> Vec<f64> {
    sweep
        .runs
        .iter()
        .filter(|r| r.point.index == index)
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(f)
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn baseline_sanity(ntv: &SweepResult) -> Verdict {
    let avg = ntv.averaged();
    let mut failures = Vec::new();
    if !ntv.is_complete() {
        failures.push("incomplete sweep".into());
    }

    let low = &avg[0];
    let v_low = speed(low, ClassLabel::All);
    if (v_low - FREE_FLOW_KMH).abs() > 0.02 * FREE_FLOW_KMH {
        failures.push(format!(
            "{:.0} veh/km runs at {v_low:.1} km/h, not within 2% of {FREE_FLOW_KMH}",
            low.point.density
        ));
    }
    let jam = avg.last().unwrap();
    let v_jam = speed(jam, ClassLabel::All);
    if v_jam != 0.0 {
        failures.push(format!("jam speed {v_jam}"));
    }

    // unimodal: no rise after the peak or fall before it beyond two
    // standard errors
    let flows: Vec<(f64, f64)> = avg
        .iter()
        .map(|p| mean_se(&per_seed(ntv, p.point.index, |s| s.flow_veh_h)))
        .collect();
    let peak = (0..flows.len()).max_by(|&i, &j| flows[i].0.partial_cmp(&flows[j].0).unwrap()).unwrap();
    for w in 0..flows.len() - 1 {
        let ((a, sa), (b, sb)) = (flows[w], flows[w + 1]);
        let noise = 2.0 * (sa * sa + sb * sb).sqrt();
        let bad = if w < peak { b < a - noise } else { b > a + noise };
        if bad {
            failures.push(format!("flow not unimodal between {} and {} veh/km", avg[w].point.density, avg[w + 1].point.density));
        }
    }

    // the same limit without random slowdown
    let no_slowdown = SimConfig {
        p_sd: 0.0,
        tv_penetration: 0.0,
        population: Population::Density(avg[0].point.density),
        ..ntv.spec.config_for(&low.point, ntv.spec.base.seed)
    };
    let mut sim = Simulation::new(no_slowdown).unwrap();
    sim.run().unwrap();
    let v_det = lanetrade::experiments::summarize(&sim).class(ClassLabel::All).mean_speed_kmh.unwrap();

    verdict(
        5,
        "baseline ring sanity",
        failures,
        format!(
            "speed at {:.0} veh/km {v_low:.2} km/h (p_sd 0: {v_det:.2}), jam {v_jam}, flow peak {:.0} veh/h at {} veh/km",
            low.point.density, flows[peak].0, avg[peak].point.density
        ),
    )
}

fn ledger_identity() -> Verdict {
    let mut failures = Vec::new();
    let mut games = 0;
    for (density, seed) in [(15.0, 1), (40.0, 2), (90.0, 3)] {
        let cfg = SimConfig {
            population: Population::Density(density),
            tv_penetration: 1.0,
            seed,
            ..Default::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run().unwrap();
        for g in sim.ledger().records() {
            games += 1;
            let half = g.joint_payoff / 2.0;
            if g.kind != GameKind::Tu || half < 0.0 || g.benefit_a() != half || g.benefit_b() != half {
                failures.push(format!("game at step {} between {} and {}", g.step, g.a_id, g.b_id));
                break;
            }
        }
        let balance = sim.ledger().net_payment_balance();
        if balance != 0.0 {
            failures.push(format!("payments do not balance at {density} veh/km: {balance:e}"));
        }
    }
    verdict(6, "win-win ledger identity", failures, format!("{games} games on the full ring"))
}

fn class_ordering(tv: &SweepResult) -> Verdict {
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for p in tv.averaged().iter().filter(|p| (40.0..=100.0).contains(&p.point.density)) {
        let gap = speed(p, ClassLabel::TvHigh) / speed(p, ClassLabel::TvLow) - 1.0;
        worst = worst.min(gap);
        if !(gap >= 0.05) {
            failures.push(format!("{} veh/km: +{:.2}%", p.point.density, 100.0 * gap));
        }
    }
    verdict(
        7,
        "high-VOT speed advantage",
        failures,
        format!("smallest advantage over 40-100 veh/km {:+.2}%", 100.0 * worst),
    )
}

fn aggregate_effect(tv: &SweepResult, ntv: &SweepResult) -> Verdict {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (a, b) in tv.averaged().iter().zip(ntv.averaged().iter()) {
        let (v1, v0) = (speed(a, ClassLabel::All), speed(b, ClassLabel::All));
        let rel = if v0 == 0.0 && v1 == 0.0 { 0.0 } else { v1 / v0 - 1.0 };
        if rel.abs() > worst.abs() {
            worst = rel;
        }
        if !(rel.abs() <= 0.05) {
            failures.push(format!("{} veh/km: {:+.2}%", a.point.density, 100.0 * rel));
        }
    }
    verdict(
        8,
        "no adverse aggregate effect",
        failures,
        format!("largest deviation from the all-NTV curve {:+.2}%", 100.0 * worst),
    )
}

fn extreme_neutrality(tv: &SweepResult) -> Verdict {
    let mut failures = Vec::new();
    let mut checked = Vec::new();
    for p in tv.averaged().iter().filter(|p| p.point.density < 10.0 || p.point.density > 131.0) {
        for label in [ClassLabel::TvHigh, ClassLabel::TvLow] {
            let Some(rel) = p.class(label).beta_relative else {
                failures.push(format!("{} veh/km {}: no measurement", p.point.density, label.as_str()));
                continue;
            };
            checked.push(format!("{:.2} {} {:.3}%", p.point.density, label.as_str(), 100.0 * rel));
            if !(rel.abs() < 0.002) {
                failures.push(format!("{} veh/km {}: {:.3}%", p.point.density, label.as_str(), 100.0 * rel));
            }
        }
    }
    verdict(9, "extreme-regime neutrality", failures, format!("relative beta: {}", checked.join(", ")))
}

fn untruthfulness(tv: &SweepResult) -> Verdict {
    let densities = [80.0, 100.0, 120.0];
    let truthful: Vec<AveragedPoint> = tv
        .averaged()
        .into_iter()
        .filter(|p| densities.contains(&p.point.density))
        .collect();
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for (preset, liar) in [
        (Preset::UntruthfulHigh, ClassLabel::TvHigh),
        (Preset::UntruthfulLow, ClassLabel::TvLow),
    ] {
        let mut spec = ScenarioSpec::preset(preset);
        spec.densities = densities.to_vec();
        spec.penetrations = vec![1.0];
        let lying = run_sweep(&spec, jobs()).unwrap();
        assert_ne!(lying.spec.base.untruthful_mode, UntruthfulMode::None);
        for (p, t) in lying.averaged().iter().zip(&truthful) {
            let (bl, bt) = (p.class(liar).beta.unwrap(), t.class(liar).beta.unwrap());
            notes.push(format!("{} {} {:.4} vs {:.4}", preset.as_str(), p.point.density, bl, bt));
            if !(bl <= bt) {
                failures.push(format!("{} at {} veh/km: lying {bl:.4} > truthful {bt:.4}", preset.as_str(), p.point.density));
            }
        }
    }
    verdict(10, "no gain from misreporting", failures, format!("beta $/h lying vs truthful: {}", notes.join(", ")))
}

fn shockwaves() -> Verdict {
    let spec = ScenarioSpec::preset(Preset::ShockwaveRing);
    let maps = run_shockwave(&spec, jobs()).unwrap();
    let mut failures = Vec::new();
    if maps.len() != 4 {
        failures.push(format!("{} maps", maps.len()));
    }
    for m in &maps {
        if m.heatmap.rows() != 360 || m.heatmap.cols() != 120 || m.heatmap.is_empty() {
            failures.push(format!("map {} / {} has shape {}x{}", m.density, m.penetration, m.heatmap.rows(), m.heatmap.cols()));
        }
    }
    let ntv = maps.iter().find(|m| m.density == 13.3 && m.penetration == 0.0);
    let backward = ntv.map(|m| m.backward_bands().count()).unwrap_or(0);
    let slope = ntv
        .and_then(|m| m.backward_bands().map(|b| b.slope).reduce(f64::min))
        .unwrap_or(f64::NAN);
    if backward == 0 {
        failures.push("no backward band in the 13.3 veh/km all-NTV map".into());
    }
    verdict(
        11,
        "shock waves",
        failures,
        format!("{} maps, {backward} backward bands at 13.3 veh/km all-NTV (steepest {slope:.3} bins/bin)", maps.len()),
    )
}

fn write_run(dir: &Path, cfg: &SimConfig) {
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let mut t = Table::create(&dir.join("trajectory.csv"), &TRAJECTORY_HEADER).unwrap();
    sim.run_observed(|lat| trajectory_rows(&mut t, lat).unwrap()).unwrap();
    t.finish().unwrap();
    write_ledger(&dir.join("ledger.csv"), sim.ledger().records()).unwrap();
    let s = lanetrade::experiments::summarize(&sim);
    let point = lanetrade::experiments::GridPoint {
        index: 0,
        density: cfg.density(),
        penetration: cfg.tv_penetration,
        ratio: cfg.high_low_ratio,
        vot_high: cfg.vot_high,
    };
    let mut tables = RunTables::create(dir).unwrap();
    tables.push(&point, cfg.seed, &s).unwrap();
    tables.finish().unwrap();
}

fn same_bytes(a: &Path, b: &Path) -> Vec<String> {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    names
        .into_iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect()
}

fn determinism_and_speed(tv_elapsed: Duration, tv: &SweepResult) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = SimConfig {
        n_cells: 600,
        steps: 600,
        warmup: 100,
        tv_penetration: 0.6,
        seed: 2718,
        ..Default::default()
    };
    let mut failures = Vec::new();
    for dir in [&a, &b] {
        std::fs::create_dir_all(dir).unwrap();
        write_run(dir, &cfg);
    }
    failures.extend(same_bytes(&a, &b).into_iter().map(|f| format!("{f} differs between runs")));

    let mut small = ScenarioSpec::preset(Preset::BenefitHeatmap);
    small.base.n_cells = 300;
    small.densities = vec![30.0, 90.0];
    small.penetrations = vec![0.5, 1.0];
    small.n_seeds = 3;
    small.horizon = 400;
    small.warmup = 100;
    let (sa, sb) = (tmp.path().join("sa"), tmp.path().join("sb"));
    for (dir, j) in [(&sa, 1), (&sb, 3)] {
        std::fs::create_dir_all(dir).unwrap();
        write_sweep_tables(dir, &run_sweep(&small, j).unwrap()).unwrap();
    }
    failures.extend(same_bytes(&sa, &sb).into_iter().map(|f| format!("sweep {f} depends on thread count")));

    let runs = tv.runs.len();
    if runs != 270 || !tv.is_complete() {
        failures.push(format!("density sweep ran {runs} jobs"));
    }
    if tv_elapsed >= SWEEP_BUDGET {
        failures.push(format!("density sweep took {:.0} s", tv_elapsed.as_secs_f64()));
    }
    verdict(
        12,
        "determinism and throughput",
        failures,
        format!(
            "byte-identical reruns; 27 densities x 10 seeds x 3600 steps on {} cells in {:.0} s with {} threads",
            2 * tv.spec.base.n_cells,
            tv_elapsed.as_secs_f64(),
            jobs()
        ),
    )
}

fn density_sweep(penetration: f64) -> (SweepResult, Duration) {
    let mut spec = ScenarioSpec::preset(Preset::SpeedDensity);
    spec.penetrations = vec![penetration];
    let started = Instant::now();
    let result = run_sweep(&spec, jobs()).unwrap();
    (result, started.elapsed())
}

fn report(v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {:>2} {}: {}", v.id, v.name, v.detail);
}

fn main() {
    let mut verdicts = Vec::new();
    let mut record = |v: Verdict| {
        report(&v);
        verdicts.push(v);
    };

    record(worked_example());
    record(solver_oracles());
    record(tu_structure());
    record(time_difference_oracle());

    let (ntv, _) = density_sweep(0.0);
    let (tv, tv_elapsed) = density_sweep(1.0);

    record(baseline_sanity(&ntv));
    record(ledger_identity());
    record(class_ordering(&tv));
    record(aggregate_effect(&tv, &ntv));
    record(extreme_neutrality(&tv));
    record(untruthfulness(&tv));
    record(shockwaves());
    record(determinism_and_speed(tv_elapsed, &tv));

    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed.len(), verdicts.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
