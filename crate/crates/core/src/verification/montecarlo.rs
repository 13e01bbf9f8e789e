//! Monte Carlo oracles: a perturbation test of the deposit-rate policy and
//! the gap between simulated expected log utility and the closed-form value.
//!
//! Both simulate the deposit regime directly in terms of the effective
//! wealth `D = v - c t + c T e^{r (t - T)}`. With all cash at the deposit
//! rate, `D` is self-financing, `dD = r (D - y) dt + y dS/S`, and is stepped
//! exactly in log space, so it stays positive and `ln V(T) = ln D(T)`. The
//! allocation is `y = alpha * Y_r`, capped at `max(v - c t, 0)` so the
//! deposit stays nonnegative; capped steps are counted as clip events.
//! Every scale factor is driven by the same per-path normal draws.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::{MarketParams, PriceStepper, StatePoint};
use crate::policy::{
    candidate_allocation, complete_decision, contribution_value, effective_wealth, optimal_policy,
    risk_premium, value_function, PolicyDecision, PolicyWarning, Regime,
};
use crate::simulation::path_stream;
use crate::stats::mean_std_error;

/// Clip-event fraction above which the regime assumption counts as violated.
pub const CLIP_FLAG_FRACTION: f64 = 0.01;
/// Floor-hit fraction above which the price floor counts as influential.
pub const FLOOR_FLAG_FRACTION: f64 = 1e-3;

/// `y = alpha * Y_r`, capped at the free wealth so the deposit stays
/// nonnegative. Capped decisions carry [`PolicyWarning::Clipped`]. For use
/// with the simulation engine.
pub fn scaled_policy(
    alpha: f64,
    params: MarketParams,
) -> impl Fn(&StatePoint) -> Result<PolicyDecision> + Sync {
    move |state: &StatePoint| {
        let y = alpha * candidate_allocation(state.t, state.s, state.v, params.deposit_rate, &params)?;
        let free = state.v - params.contribution * state.t;
        if y > free {
            let mut decision = complete_decision(state, free.max(0.0), &params);
            decision.warnings.push(PolicyWarning::Clipped);
            Ok(decision)
        } else {
            Ok(complete_decision(state, y, &params))
        }
    }
}

/// Terminal `ln V` per scale factor, in path order.
struct DepositRuns {
    log_terminal: Vec<Vec<f64>>,
    clip_events: Vec<u64>,
    floor_hits: u64,
}

struct PathResult {
    log_d: Vec<f64>,
    clips: Vec<u64>,
    floor_hits: u64,
}

fn deposit_path(
    params: &MarketParams,
    state0: &StatePoint,
    alphas: &[f64],
    n_steps: usize,
    seed: u64,
    path: usize,
) -> PathResult {
    let r = params.deposit_rate;
    let sigma2 = params.volatility.powi(2);
    let dt = (params.horizon - state0.t) / n_steps as f64;
    let var_step = PriceStepper::Exact.increment_variance(dt, params);
    let floor = params.price_floor();
    let d0 = state0.v - params.contribution * state0.t + contribution_value(state0.t, r, params);

    let mut rng = path_stream(seed, path);
    let mut s = state0.s;
    let mut log_d = vec![d0.ln(); alphas.len()];
    let mut clips = vec![0u64; alphas.len()];
    let mut floor_hits = 0;
    for step in 0..n_steps {
        let t = state0.t + step as f64 * dt;
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut s_next = PriceStepper::Exact
            .step(s, dt, z, params)
            .expect("dt is positive");
        if s_next < floor {
            s_next = floor;
            floor_hits += 1;
        }
        let ret = (s_next - s) / s;
        let var = var_step / (s * s);
        let exposure = risk_premium(s, r, params) * s / sigma2;
        let pv = contribution_value(t, r, params);
        for (i, &alpha) in alphas.iter().enumerate() {
            let d = log_d[i].exp();
            let cap = (d - pv).max(0.0);
            let mut fraction = alpha * exposure;
            if fraction * d > cap {
                fraction = cap / d;
                clips[i] += 1;
            }
            log_d[i] += r * (1.0 - fraction) * dt + fraction * ret - 0.5 * fraction * fraction * var;
        }
        s = s_next;
    }
    PathResult {
        log_d,
        clips,
        floor_hits,
    }
}

fn deposit_runs(
    params: &MarketParams,
    state0: &StatePoint,
    alphas: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<DepositRuns> {
    if n_paths == 0 || n_steps == 0 {
        return Err(domain("n_paths and n_steps must be at least 1"));
    }
    if !(state0.t < params.horizon) {
        return Err(domain("start time must precede the horizon"));
    }
    require_deposit(state0, params)?;
    let paths: Vec<PathResult> = (0..n_paths)
        .into_par_iter()
        .map(|path| deposit_path(params, state0, alphas, n_steps, seed, path))
        .collect();
    let mut runs = DepositRuns {
        log_terminal: vec![Vec::with_capacity(n_paths); alphas.len()],
        clip_events: vec![0; alphas.len()],
        floor_hits: 0,
    };
    for p in paths {
        for i in 0..alphas.len() {
            runs.log_terminal[i].push(p.log_d[i]);
            runs.clip_events[i] += p.clips[i];
        }
        runs.floor_hits += p.floor_hits;
    }
    Ok(runs)
}

fn require_deposit(state0: &StatePoint, params: &MarketParams) -> Result<()> {
    let decision = optimal_policy(state0, params)?;
    if decision.regime != Regime::Deposit || !decision.warnings.is_empty() {
        return Err(domain(format!(
            "start state (t={}, s={}, v={}) is not in the deposit regime",
            state0.t, state0.s, state0.v
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFlag {
    /// More than 1% of decisions were capped at the free wealth.
    ClipFraction,
    /// More than 0.1% of price steps hit the floor.
    FloorHits,
    /// The spread of the curve is within two standard errors.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCurve {
    pub alphas: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Paired standard errors of `estimate(alpha) - estimate(1)`.
    pub diff_std_errors: Vec<f64>,
    pub alpha_star: f64,
    /// Largest clip-event fraction over the scale factors.
    pub clip_fraction: f64,
    pub floor_hit_fraction: f64,
    pub unimodal: bool,
    pub concave: bool,
    pub flags: Vec<CurveFlag>,
}

/// Expected log utility of `alpha * Y_r` for each `alpha`, from `state0` to
/// the horizon, with common random numbers across scales.
pub fn mc_policy_optimality(
    params: &MarketParams,
    state0: &StatePoint,
    alphas: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PerturbationCurve> {
    let base = alphas
        .iter()
        .position(|&a| a == 1.0)
        .ok_or_else(|| domain("alphas must include 1.0"))?;
    let runs = deposit_runs(params, state0, alphas, n_paths, n_steps, seed)?;
    let logs = &runs.log_terminal;

    let (estimates, std_errors): (Vec<f64>, Vec<f64>) =
        logs.iter().map(|l| mean_std_error(l)).unzip();
    let diff_std_errors: Vec<f64> = logs
        .iter()
        .map(|l| {
            let diffs: Vec<f64> = l.iter().zip(&logs[base]).map(|(a, b)| a - b).collect();
            mean_std_error(&diffs).1
        })
        .collect();

    let star = (0..estimates.len()).fold(0, |best, i| {
        if estimates[i] > estimates[best] {
            i
        } else {
            best
        }
    });
    let unimodal = estimates[..=star].windows(2).all(|w| w[0] <= w[1])
        && estimates[star..].windows(2).all(|w| w[0] >= w[1]);
    let slopes: Vec<f64> = (1..alphas.len())
        .map(|i| (estimates[i] - estimates[i - 1]) / (alphas[i] - alphas[i - 1]))
        .collect();
    let concave = slopes.windows(2).all(|w| w[1] <= w[0]);

    let decisions = (n_paths * n_steps) as f64;
    let clip_fraction = runs.clip_events.iter().map(|&c| c as f64 / decisions).fold(0.0, f64::max);
    let floor_hit_fraction = runs.floor_hits as f64 / decisions;
    let mut flags = Vec::new();
    if clip_fraction > CLIP_FLAG_FRACTION {
        flags.push(CurveFlag::ClipFraction);
    }
    if floor_hit_fraction > FLOOR_FLAG_FRACTION {
        flags.push(CurveFlag::FloorHits);
    }
    let spread = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let noise = diff_std_errors.iter().cloned().fold(0.0, f64::max);
    if alphas.len() > 1 && spread <= 2.0 * noise {
        flags.push(CurveFlag::Flat);
    }

    Ok(PerturbationCurve {
        alphas: alphas.to_vec(),
        estimates,
        std_errors,
        diff_std_errors,
        alpha_star: alphas[star],
        clip_fraction,
        floor_hit_fraction,
        unimodal,
        concave,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueGap {
    /// Simulated `E[ln V(T)]` under the deposit-regime policy.
    pub mc_estimate: f64,
    pub std_error: f64,
    /// `ln(v0 - c t0 + c T e^{r (t0 - T)})`.
    pub closed_form_value: f64,
    pub gap: f64,
    /// `r (T - t0)`, the part of the gap earned by the deposit rate alone.
    pub riskless_growth: f64,
    pub clip_fraction: f64,
}

/// Difference between the simulated value of the deposit-regime policy and
/// the closed-form deposit-rate value function at `state0`.
pub fn value_gap(
    params: &MarketParams,
    state0: &StatePoint,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<ValueGap> {
    if n_paths == 0 || n_steps == 0 {
        return Err(domain("n_paths and n_steps must be at least 1"));
    }
    let closed_form_value = value_function(state0.t, state0.v, params.deposit_rate, params)?;
    if state0.t == params.horizon {
        return Ok(ValueGap {
            mc_estimate: closed_form_value,
            std_error: 0.0,
            closed_form_value,
            gap: 0.0,
            riskless_growth: 0.0,
            clip_fraction: 0.0,
        });
    }
    effective_wealth(state0.t, state0.v, params.deposit_rate, params)?;
    let runs = deposit_runs(params, state0, &[1.0], n_paths, n_steps, seed)?;
    let (mc_estimate, std_error) = mean_std_error(&runs.log_terminal[0]);
    Ok(ValueGap {
        mc_estimate,
        std_error,
        closed_form_value,
        gap: mc_estimate - closed_form_value,
        riskless_growth: params.deposit_rate * (params.horizon - state0.t),
        clip_fraction: runs.clip_events[0] as f64 / (n_paths * n_steps) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{run_paths, SimConfig, WealthScheme};

    fn reference() -> MarketParams {
        MarketParams::new(0.03, 0.06, 0.5, 3.0, 1.5, 0.2, 20.0).unwrap()
    }

    fn start() -> StatePoint {
        StatePoint { t: 0.0, s: 2.0, v: 1200.0 }
    }

    #[test]
    fn singleton_curve() {
        let p = reference();
        let curve = mc_policy_optimality(&p, &start(), &[1.0], 200, 20, 3).unwrap();
        assert_eq!(curve.alpha_star, 1.0);
        assert_eq!(curve.estimates.len(), 1);
        assert_eq!(curve.diff_std_errors, vec![0.0]);
        assert!(curve.unimodal && curve.concave);
    }

    #[test]
    fn argument_errors() {
        let p = reference();
        assert!(mc_policy_optimality(&p, &start(), &[1.0], 0, 20, 3).is_err());
        assert!(mc_policy_optimality(&p, &start(), &[1.0], 10, 0, 3).is_err());
        assert!(mc_policy_optimality(&p, &start(), &[0.9], 10, 10, 3).is_err());
        let borrow = StatePoint { t: 5.0, s: 2.0, v: 1.5 };
        assert!(mc_policy_optimality(&p, &borrow, &[1.0], 10, 10, 3).is_err());
        assert!(value_gap(&p, &start(), 0, 10, 3).is_err());
    }

    #[test]
    fn clipping_caps_at_free_wealth() {
        let p = reference();
        let policy = scaled_policy(1e3, p);
        let state = StatePoint { t: 5.0, s: 2.0, v: 50.0 };
        let d = policy(&state).unwrap();
        assert_eq!(d.y, 49.0);
        assert_eq!((d.l, d.b), (0.0, 0.0));
        assert_eq!(d.warnings, vec![PolicyWarning::Clipped]);
    }

    #[test]
    fn gap_at_horizon_is_zero() {
        let p = reference();
        let state = StatePoint { t: 20.0, s: 2.0, v: 1200.0 };
        let g = value_gap(&p, &state, 10, 10, 1).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.mc_estimate, 1200.0f64.ln());
    }

    #[test]
    fn curve_is_reproducible() {
        let p = reference();
        let a = mc_policy_optimality(&p, &start(), &[0.8, 1.0, 1.2], 300, 20, 9).unwrap();
        let b = mc_policy_optimality(&p, &start(), &[0.8, 1.0, 1.2], 300, 20, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matches_engine_while_unclipped() {
        // Same draws, same scheme: the engine run of the scaled policy and
        // the effective-wealth recursion agree path by path.
        let p = reference();
        let (n_paths, n_steps, seed) = (50, 40, 4);
        let runs = deposit_runs(&p, &start(), &[0.7], n_paths, n_steps, seed).unwrap();
        assert_eq!(runs.clip_events[0], 0);
        let config = SimConfig {
            n_paths,
            n_steps,
            t0: 0.0,
            s0: 2.0,
            v0: 1200.0,
            seed,
            stepper: PriceStepper::Exact,
            scheme: WealthScheme::Exponential,
        };
        let engine = run_paths(&scaled_policy(0.7, p), &config, &p).unwrap();
        for (log_d, v) in runs.log_terminal[0].iter().zip(&engine.terminal_wealth) {
            assert!((log_d - v.ln()).abs() < 1e-9, "{log_d} vs {}", v.ln());
        }
    }
}
