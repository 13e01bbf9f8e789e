//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.
//!
//! Reference set: r = 0.03, R = 0.06, c = 0.2, T = 20, k = 0.5, theta = 3,
//! s0 = 2, sigma = 1.5 unless a sweep varies it.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dc_pension::market::{ou_euler_step, ou_exact_step, ou_moments};
use dc_pension::policy::{candidate_allocation, effective_wealth, optimal_policy, phi, value_function};
use dc_pension::simulation::{path_normals, riskless_policy, run_paths, SimConfig};
use dc_pension::stats::mean_variance;
use dc_pension::sweep::{emit_csv, run_sweep, Preset, SweepRow, SweepSpec};
use dc_pension::verification::{
    biconjugate, dual_wealth, foc_allocation, legendre_transform, linspace, log_dual, logspace,
    mc_policy_optimality, phi_ode_residual, value_gap, SampledFunction,
};
use dc_pension::{MarketParams, PriceStepper, Regime, StatePoint, WealthScheme};

const PHI_ODE_TOL: f64 = 1e-12;
const PHI_BOUNDARY_TOL: f64 = 1e-15;
const PHI_RUNTIME: Duration = Duration::from_millis(100);
const TERMINAL_REL_TOL: f64 = 1e-12;
const LEGENDRE_TOL: f64 = 1e-6;
const BICONJUGATE_TOL: f64 = 1e-5;
const FOC_REL_TOL: f64 = 1e-12;
const CONTINUITY_STEP: f64 = 1e-6;
const CONTINUITY_TOL: f64 = 1e-6;
const SWEEP_RUNTIME: Duration = Duration::from_secs(1);
const OU_SAMPLES: usize = 100_000;
const OU_SE_BOUND: f64 = 4.0;
/// Accepted band for the observed convergence order of the Euler drift.
const EULER_ORDER_BAND: (f64, f64) = (0.9, 1.1);
const ZERO_RISK_ORACLE: f64 = 186.211_880_039_050_9;
const ZERO_RISK_REL_TOL: f64 = 1e-3;
const MC_PATHS: usize = 100_000;
const MC_STEPS: usize = 200;
const MC_RUNTIME: Duration = Duration::from_secs(60);
const ALPHA_STAR_BAND: (f64, f64) = (0.9, 1.1);

type Outcome = Result<String, String>;

fn reference() -> MarketParams {
    MarketParams::new(0.03, 0.06, 0.5, 3.0, 1.5, 0.2, 20.0).unwrap()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn phi_ode_exactness() -> Outcome {
    let p = reference();
    let start = Instant::now();
    let grid = linspace(0.0, p.horizon, 1000);
    let mut worst = 0.0_f64;
    let mut boundary = 0.0_f64;
    for rate in [p.deposit_rate, p.loan_rate] {
        let rep = phi_ode_residual(&grid, rate, &p).map_err(err)?;
        worst = worst.max(rep.residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs())));
        boundary = boundary.max(phi(p.horizon, rate, &p).map_err(err)?.abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= PHI_ODE_TOL && boundary <= PHI_BOUNDARY_TOL && elapsed < PHI_RUNTIME,
        format!("max_abs {worst:.3e}, |phi(T)| {boundary:.1e}, {elapsed:.2?}"),
    )
}

fn terminal_conditions() -> Outcome {
    let p = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_v, mut worst_z) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        // ln v is kept away from zero so the relative error is meaningful
        let v = 10f64.powf(rng.random_range(0.5..4.0));
        let z = 10f64.powf(rng.random_range(-2.0..2.0));
        for rate in [p.deposit_rate, p.loan_rate] {
            worst_v = worst_v.max(rel(value_function(p.horizon, v, rate, &p).map_err(err)?, v.ln()));
        }
        worst_z = worst_z.max(rel(dual_wealth(p.horizon, z, &p).map_err(err)?, 1.0 / z));
    }
    check(
        worst_v <= TERMINAL_REL_TOL && worst_z <= TERMINAL_REL_TOL,
        format!("value rel err {worst_v:.2e}, dual wealth rel err {worst_z:.2e}"),
    )
}

fn legendre_duality() -> Outcome {
    let u = SampledFunction::tabulate(logspace(1e-4, 1e4, 100_000).map_err(err)?, f64::ln);
    let mut worst = 0.0_f64;
    for z in logspace(0.1, 10.0, 50).map_err(err)? {
        worst = worst.max((legendre_transform(&u, z).map_err(err)? - log_dual(z).map_err(err)?).abs());
    }
    let xs = linspace(0.5, 5.0, 50);
    let back = biconjugate(&u, &logspace(0.1, 10.0, 2000).map_err(err)?, &xs).map_err(err)?;
    let bicon = xs
        .iter()
        .zip(&back)
        .fold(0.0_f64, |m, (x, b)| m.max((b - x.ln()).abs()));
    check(
        worst <= LEGENDRE_TOL && bicon <= BICONJUGATE_TOL,
        format!("transform err {worst:.2e}, biconjugate err {bicon:.2e}"),
    )
}

fn foc_consistency() -> Outcome {
    let p = reference();
    let r = p.deposit_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut count, mut tries) = (0.0_f64, 0, 0);
    while count < 100 {
        tries += 1;
        if tries > 100_000 {
            return Err("could not sample 100 deposit-regime states".into());
        }
        let state = StatePoint {
            t: rng.random_range(0.0..p.horizon),
            s: rng.random_range(0.1..6.0),
            v: 10f64.powf(rng.random_range(0.0..4.0)),
        };
        match optimal_policy(&state, &p) {
            Ok(d) if d.regime == Regime::Deposit && d.warnings.is_empty() => {}
            _ => continue,
        }
        count += 1;
        let d = effective_wealth(state.t, state.v, r, &p).map_err(err)?.d;
        let y = foc_allocation(&state, r, 1.0 / d, -1.0 / (d * d), 0.0, &p).map_err(err)?;
        let expected = candidate_allocation(state.t, state.s, state.v, r, &p).map_err(err)?;
        worst = worst.max(if expected == 0.0 { y.abs() } else { rel(y, expected) });
    }
    check(worst <= FOC_REL_TOL, format!("max rel err {worst:.2e} over {count} states"))
}

/// Wealth at which `v - c t` equals the candidate at `rate`; the candidate
/// is affine in `v` with unit-free slope `a = q s / sigma^2`.
fn boundary_wealth(t: f64, s: f64, rate: f64, p: &MarketParams) -> f64 {
    let a = (p.reversion * (p.long_run - s) - rate * s) * s / p.volatility.powi(2);
    let phi_rate = phi(t, rate, p).unwrap();
    (p.contribution * t - a * phi_rate) / (1.0 - a)
}

fn policy_continuity() -> Outcome {
    let p = reference();
    let (t, s) = (5.0, 2.0);
    let y_at = |v: f64| optimal_policy(&StatePoint { t, s, v }, &p).map(|d| (d.y, d.regime));
    let mut worst = 0.0_f64;
    let mut details = Vec::new();
    for rate in [p.loan_rate, p.deposit_rate] {
        let vb = boundary_wealth(t, s, rate, &p);
        let ys = (-50..=50)
            .map(|i| y_at(vb * (1.0 + i as f64 * CONTINUITY_STEP)).map(|(y, _)| y))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
        // A jump is an increment larger than both neighbouring increments
        // allow; a kink only changes the slope.
        for i in 1..diffs.len() - 1 {
            let bound = diffs[i - 1].abs().max(diffs[i + 1].abs());
            let excess = (diffs[i].abs() - bound).max(0.0) / ys[i].abs();
            worst = worst.max(excess);
        }
        details.push(format!("boundary v={vb:.6}"));
    }
    let regimes = linspace(0.5, 5.0, 2000)
        .into_iter()
        .map(|v| y_at(v).map(|(_, r)| r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let ordered = regimes.windows(2).all(|w| w[0] <= w[1]);
    let all_seen = Regime::ALL.iter().all(|r| regimes.contains(r));
    check(
        worst <= CONTINUITY_TOL && ordered && all_seen,
        format!(
            "{}; max relative jump {worst:.2e}; ordered Borrow->Constrained->Deposit: {}",
            details.join(", "),
            ordered && all_seen
        ),
    )
}

fn write_csv(dir: &Path, name: &str, rows: &[SweepRow]) -> Result<(), String> {
    let file = std::fs::File::create(dir.join(name)).map_err(err)?;
    emit_csv(rows, file).map_err(err)
}

fn figure_monotonicity() -> Outcome {
    let p = reference();
    let dir = tempfile::tempdir().map_err(err)?;
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, preset) in [("fig1", Preset::Fig1), ("fig2", Preset::Fig2)] {
        let rows = run_sweep(&SweepSpec::preset(preset, 2.0).map_err(err)?, &p).map_err(err)?;
        let dec = rows.windows(2).all(|w| w[1].y_star < w[0].y_star);
        ok &= dec;
        notes.push(format!("{name} strictly decreasing: {dec}"));
        write_csv(dir.path(), &format!("{name}.csv"), &rows)?;
    }
    let rows = run_sweep(&SweepSpec::preset(Preset::Fig3, 2.0).map_err(err)?, &p).map_err(err)?;
    let nondec = rows.windows(2).all(|w| w[1].y_star >= w[0].y_star);
    ok &= nondec;
    notes.push(format!("fig3 nondecreasing: {nondec}"));
    write_csv(dir.path(), "fig3.csv", &rows)?;
    let rows = run_sweep(&SweepSpec::fig5(0.04, 0.12, 15, 2.0, 1.1).map_err(err)?, &p).map_err(err)?;
    let borrow = rows.iter().all(|r| r.regime == Regime::Borrow);
    let dec = rows.windows(2).all(|w| w[1].y_star < w[0].y_star);
    ok &= borrow && dec;
    notes.push(format!("fig5 all Borrow: {borrow}, strictly decreasing: {dec}"));
    write_csv(dir.path(), "fig5.csv", &rows)?;
    let elapsed = start.elapsed();
    ok &= elapsed < SWEEP_RUNTIME;
    check(ok, format!("{}; {elapsed:.2?}", notes.join("; ")))
}

fn ou_marginal() -> Outcome {
    let p = reference();
    let (s0, t) = (1.0, 1.0);
    let samples: Vec<f64> = path_normals(7, 0, OU_SAMPLES)
        .into_iter()
        .map(|z| ou_exact_step(s0, t, z, &p).unwrap())
        .collect();
    let (mean, var) = mean_variance(&samples);
    let (m, v) = ou_moments(s0, t, &p).map_err(err)?;
    let n = OU_SAMPLES as f64;
    let mean_z = (mean - m) / (v / n).sqrt();
    let var_z = (var - v) / (v * (2.0 / (n - 1.0)).sqrt());

    let drift_error = |dt: f64| {
        let steps = (t / dt).round() as usize;
        let mut s = s0;
        for _ in 0..steps {
            s = ou_euler_step(s, dt, 0.0, &p).unwrap();
        }
        (s - m).abs()
    };
    let errors: Vec<f64> = [0.1, 0.01, 0.001].iter().map(|&dt| drift_error(dt)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
    let order_ok = orders
        .iter()
        .all(|o| (EULER_ORDER_BAND.0..=EULER_ORDER_BAND.1).contains(o));
    check(
        mean_z.abs() <= OU_SE_BOUND && var_z.abs() <= OU_SE_BOUND && order_ok,
        format!(
            "mean {mean_z:+.2} SE, variance {var_z:+.2} SE; Euler errors {}, orders {orders:.3?}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn zero_risk_wealth() -> Outcome {
    let p = reference();
    let config = SimConfig {
        n_paths: 4,
        n_steps: 2000,
        t0: 0.0,
        s0: 2.0,
        v0: 100.0,
        seed: 11,
        stepper: PriceStepper::Exact,
        scheme: WealthScheme::Linear,
    };
    let run = run_paths(&riskless_policy(p), &config, &p).map_err(err)?;
    let worst = run
        .terminal_wealth
        .iter()
        .fold(0.0_f64, |m, v| m.max(rel(*v, ZERO_RISK_ORACLE)));
    check(
        worst <= ZERO_RISK_REL_TOL,
        format!("V(T) = {:.6}, rel err {worst:.2e}", run.terminal_wealth[0]),
    )
}

fn policy_optimality() -> Outcome {
    let p = reference();
    let alphas: Vec<f64> = (6..=14).map(|i| i as f64 / 10.0).collect();
    let start = Instant::now();
    let state = StatePoint { t: 0.0, s: 2.0, v: 1200.0 };
    let curve = mc_policy_optimality(&p, &state, &alphas, MC_PATHS, MC_STEPS, 1).map_err(err)?;
    let elapsed = start.elapsed();
    let in_band = (ALPHA_STAR_BAND.0..=ALPHA_STAR_BAND.1).contains(&curve.alpha_star);
    let estimates: Vec<String> = curve.estimates.iter().map(|e| format!("{e:.5}")).collect();
    check(
        in_band && curve.unimodal && elapsed < MC_RUNTIME,
        format!(
            "alpha_star {}, unimodal {}, concave {}, E[ln V] {}, max diff SE {:.1e}, clip {:.2e}, floor hits {:.2e}, flags {:?}, {elapsed:.1?}",
            curve.alpha_star,
            curve.unimodal,
            curve.concave,
            estimates.join(" "),
            curve.diff_std_errors.iter().cloned().fold(0.0, f64::max),
            curve.clip_fraction,
            curve.floor_hit_fraction,
            curve.flags,
        ),
    )
}

fn write_config(dir: &Path) -> Result<std::path::PathBuf, String> {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"r": 0.03, "R": 0.06, "k": 0.5, "theta": 3, "sigma": 1.5, "c": 0.2, "T": 20,
            "t0": 0, "s0": 2, "v0": 1200, "seed": 5}"#,
    )
    .map_err(err)?;
    Ok(path)
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dc-pension"))
        .args(args)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "`{}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = write_config(dir.path())?;
    let config = config.to_str().unwrap();
    let mut sim_outputs = Vec::new();
    let mut verify_outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "4"), (2, "4")] {
        let csv = dir.path().join(format!("paths{run}.csv"));
        let csv = csv.to_str().unwrap();
        let stats = run_cli(&[
            "--threads", threads, "simulate", "--config", config, "--paths", "20000", "--steps",
            "100", "--csv", csv,
        ])?;
        let paths = std::fs::read(csv).map_err(err)?;
        sim_outputs.push((stats, paths));
        verify_outputs.push(run_cli(&["--threads", threads, "verify", "--config", config, "--full"])?);
    }
    let sim_same = sim_outputs.windows(2).all(|w| w[0] == w[1]);
    let verify_same = verify_outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        sim_same && verify_same,
        format!("simulate identical: {sim_same}, verify --full identical: {verify_same} (threads 1, 4, 4)"),
    )
}

fn value_gap_diagnostic() -> Outcome {
    let p = reference();
    let at_horizon = value_gap(&p, &StatePoint { t: p.horizon, s: 2.0, v: 1200.0 }, 100, 10, 1)
        .map_err(err)?;
    let gap = value_gap(&p, &StatePoint { t: 0.0, s: 2.0, v: 1200.0 }, MC_PATHS, MC_STEPS, 1)
        .map_err(err)?;
    check(
        at_horizon.gap == 0.0 && gap.gap.is_finite() && gap.std_error.is_finite() && gap.std_error > 0.0,
        format!(
            "gap at T = {}; gap at (0, 2, 1200) = {:.5} +/- {:.5} (deposit growth r(T-t0) = {:.2})",
            at_horizon.gap, gap.gap, gap.std_error, gap.riskless_growth
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 contribution ODE exactness", phi_ode_exactness),
        ("2 terminal conditions", terminal_conditions),
        ("3 Legendre duality", legendre_duality),
        ("4 first-order condition consistency", foc_consistency),
        ("5 policy continuity", policy_continuity),
        ("6 figure-shaped monotonicity", figure_monotonicity),
        ("7 O-U marginal correctness", ou_marginal),
        ("8 zero-risk wealth oracle", zero_risk_wealth),
        ("9 policy optimality", policy_optimality),
        ("10 determinism", determinism),
        ("11 value-gap diagnostic", value_gap_diagnostic),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
