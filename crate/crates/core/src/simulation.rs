//! Monte Carlo simulation of the coupled (price, wealth) system.
//!
//! One standard normal per (path, step) drives both the price and the
//! wealth. Each path draws from its own ChaCha stream keyed by
//! `(seed, path index)`, and per-path results are reduced in path order, so
//! output is bit-identical for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::market::{MarketParams, PriceStepper, StatePoint};
use crate::policy::{contribution_value, PolicyDecision, PolicyWarning, Regime};
use crate::stats::{mean_std_error, mean_variance};

/// Relative tolerance of the budget identity check.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Random stream of one path.
pub fn path_stream(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Standard normal draws for one path.
pub fn path_normals(seed: u64, path: usize, n: usize) -> Vec<f64> {
    let mut rng = path_stream(seed, path);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// How wealth is advanced over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WealthScheme {
    /// First-order increment `(r b - R l + c) dt + y dS/S`.
    Linear,
    /// Log-space step of the effective wealth; stays positive.
    #[default]
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub t0: f64,
    pub s0: f64,
    pub v0: f64,
    pub seed: u64,
    #[serde(default)]
    pub stepper: PriceStepper,
    #[serde(default)]
    pub scheme: WealthScheme,
}

impl SimConfig {
    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        if self.n_paths == 0 {
            return Err(domain("n_paths must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        if !(0.0..params.horizon).contains(&self.t0) {
            return Err(domain(format!("t0 = {} outside [0, {})", self.t0, params.horizon)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(domain(format!("s0 must be positive, got {}", self.s0)));
        }
        if !self.v0.is_finite() {
            return Err(domain("v0 must be finite"));
        }
        Ok(())
    }

    pub fn dt(&self, params: &MarketParams) -> f64 {
        (params.horizon - self.t0) / self.n_steps as f64
    }
}

/// Fraction of policy decisions spent in each regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeOccupancy {
    #[serde(rename = "Borrow")]
    pub borrow: f64,
    #[serde(rename = "Constrained")]
    pub constrained: f64,
    #[serde(rename = "Deposit")]
    pub deposit: f64,
}

impl RegimeOccupancy {
    pub fn get(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Borrow => self.borrow,
            Regime::Constrained => self.constrained,
            Regime::Deposit => self.deposit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n_paths: usize,
    pub n_steps: usize,
    pub mean_terminal_wealth: f64,
    pub var_terminal_wealth: f64,
    /// `None` when some terminal wealth is not positive.
    pub mean_log_terminal_wealth: Option<f64>,
    pub se_log_terminal_wealth: Option<f64>,
    pub nonpositive_terminal: usize,
    pub regime_occupancy: RegimeOccupancy,
    pub floor_hits: u64,
    pub clip_events: u64,
    /// Decisions taken outside the domain of the closed-form policy.
    pub liquidations: u64,
    /// Exponential steps that fell back to the linear increment because the
    /// effective wealth was not positive.
    pub linear_fallbacks: u64,
}

/// Result of a single wealth step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub s_next: f64,
    pub v_next: f64,
    pub floor_hit: bool,
    pub fallback: bool,
}

fn advance_price(
    s: f64,
    dt: f64,
    z: f64,
    params: &MarketParams,
    stepper: PriceStepper,
) -> Result<(f64, bool)> {
    if !(s > 0.0) {
        return Err(domain(format!("asset price must be positive, got s = {s}")));
    }
    let raw = stepper.step(s, dt, z, params)?;
    let floor = params.price_floor();
    Ok(if raw < floor { (floor, true) } else { (raw, false) })
}

/// Advances `(s, v)` by one step with the linear wealth increment
/// `v' = v + (r b - R l + c) dt + y (s' - s) / s`.
pub fn wealth_step(
    state: &StatePoint,
    decision: &PolicyDecision,
    dt: f64,
    z: f64,
    params: &MarketParams,
    stepper: PriceStepper,
) -> Result<StepOutcome> {
    let (s_next, floor_hit) = advance_price(state.s, dt, z, params, stepper)?;
    let carry = params.deposit_rate * decision.b - params.loan_rate * decision.l + params.contribution;
    let v_next = state.v + carry * dt + decision.y * (s_next - state.s) / state.s;
    Ok(StepOutcome {
        s_next,
        v_next,
        floor_hit,
        fallback: false,
    })
}

/// Advances `(s, v)` by one step in log space.
///
/// With `rho` the rate of the active cash leg (`R` if borrowing, else `r`)
/// the effective wealth `D = v - c t + c T e^{rho (t - T)}` is
/// self-financing with risky fraction `pi = y / D`. The step applies
///
/// ```text
/// D' = D exp(rho (1 - pi) dt + pi dS/S - pi^2 Var[dS/S] / 2)
/// ```
///
/// using the realized price increment, which keeps `D` positive. When
/// `D <= 0` the linear increment is used instead and `fallback` is set.
pub fn wealth_step_exponential(
    state: &StatePoint,
    decision: &PolicyDecision,
    dt: f64,
    z: f64,
    params: &MarketParams,
    stepper: PriceStepper,
) -> Result<StepOutcome> {
    let rho = if decision.l > 0.0 {
        params.loan_rate
    } else {
        params.deposit_rate
    };
    let c = params.contribution;
    let d = state.v - c * state.t + contribution_value(state.t, rho, params);
    if !(d > 0.0) {
        let mut out = wealth_step(state, decision, dt, z, params, stepper)?;
        out.fallback = true;
        return Ok(out);
    }
    let (s_next, floor_hit) = advance_price(state.s, dt, z, params, stepper)?;
    let fraction = decision.y / d;
    let ret = (s_next - state.s) / state.s;
    let var = stepper.increment_variance(dt, params) / (state.s * state.s);
    let log_growth = rho * (1.0 - fraction) * dt + fraction * ret - 0.5 * fraction * fraction * var;
    let t_next = state.t + dt;
    let d_next = d * log_growth.exp();
    let v_next = d_next - contribution_value(t_next, rho, params) + c * t_next;
    Ok(StepOutcome {
        s_next,
        v_next,
        floor_hit,
        fallback: false,
    })
}

fn check_admissible(
    decision: &PolicyDecision,
    state: &StatePoint,
    params: &MarketParams,
    path: usize,
    step: usize,
) -> Result<()> {
    let fail = |detail: String| Error::Inadmissible { path, step, detail };
    let PolicyDecision { y, l, b, .. } = *decision;
    if !(y.is_finite() && l.is_finite() && b.is_finite()) {
        return Err(fail(format!("non-finite decision (y={y}, l={l}, b={b})")));
    }
    if l < 0.0 || b < 0.0 {
        return Err(fail(format!("negative loan or deposit (l={l}, b={b})")));
    }
    if l * b != 0.0 {
        return Err(fail(format!("simultaneous loan and deposit (l={l}, b={b})")));
    }
    let residual = decision.budget_residual(state, params);
    let scale = decision.budget_scale(state, params);
    if residual.abs() > BUDGET_TOLERANCE * scale {
        return Err(fail(format!(
            "budget identity b + y - l + c t = v off by {residual:e} at scale {scale:e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
struct PathOutcome {
    terminal: f64,
    regimes: [u64; 3],
    floor_hits: u64,
    clip_events: u64,
    liquidations: u64,
    fallbacks: u64,
}

fn simulate_one<P>(
    policy: &P,
    config: &SimConfig,
    params: &MarketParams,
    path: usize,
) -> Result<PathOutcome>
where
    P: Fn(&StatePoint) -> Result<PolicyDecision> + Sync,
{
    let dt = config.dt(params);
    let mut rng = path_stream(config.seed, path);
    let mut out = PathOutcome::default();
    let mut state = StatePoint {
        t: config.t0,
        s: config.s0,
        v: config.v0,
    };
    for step in 0..config.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let decision = policy(&state).map_err(|e| Error::Policy {
            path,
            step,
            source: Box::new(e),
        })?;
        check_admissible(&decision, &state, params, path, step)?;
        out.regimes[decision.regime.index()] += 1;
        if decision.warnings.contains(&PolicyWarning::Clipped) {
            out.clip_events += 1;
        }
        if decision.warnings.contains(&PolicyWarning::Liquidated) {
            out.liquidations += 1;
        }
        let next = match config.scheme {
            WealthScheme::Linear => wealth_step(&state, &decision, dt, z, params, config.stepper)?,
            WealthScheme::Exponential => {
                wealth_step_exponential(&state, &decision, dt, z, params, config.stepper)?
            }
        };
        out.floor_hits += u64::from(next.floor_hit);
        out.fallbacks += u64::from(next.fallback);
        state = StatePoint {
            t: config.t0 + (step + 1) as f64 * dt,
            s: next.s_next,
            v: next.v_next,
        };
    }
    out.terminal = state.v;
    Ok(out)
}

/// Terminal wealth of every path together with the summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub stats: PathStats,
    pub terminal_wealth: Vec<f64>,
}

/// Simulates `config.n_paths` paths from `(t0, s0, v0)` to the horizon,
/// querying `policy` at every step and rejecting inadmissible decisions.
pub fn run_paths<P>(policy: &P, config: &SimConfig, params: &MarketParams) -> Result<SimulationRun>
where
    P: Fn(&StatePoint) -> Result<PolicyDecision> + Sync,
{
    config.validate(params)?;
    let outcomes: Vec<Result<PathOutcome>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| simulate_one(policy, config, params, path))
        .collect();
    // first failure in path order, independent of scheduling
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let terminal_wealth: Vec<f64> = outcomes.iter().map(|o| o.terminal).collect();
    let (mean, var) = mean_variance(&terminal_wealth);
    let nonpositive = terminal_wealth.iter().filter(|&&v| !(v > 0.0)).count();
    let (mean_log, se_log) = if nonpositive == 0 {
        let logs: Vec<f64> = terminal_wealth.iter().map(|v| v.ln()).collect();
        let (m, se) = mean_std_error(&logs);
        (Some(m), Some(se))
    } else {
        (None, None)
    };
    let mut regimes = [0u64; 3];
    let (mut floor_hits, mut clip_events, mut liquidations, mut fallbacks) = (0, 0, 0, 0);
    for o in &outcomes {
        for (acc, n) in regimes.iter_mut().zip(o.regimes) {
            *acc += n;
        }
        floor_hits += o.floor_hits;
        clip_events += o.clip_events;
        liquidations += o.liquidations;
        fallbacks += o.fallbacks;
    }
    let total = (config.n_paths * config.n_steps) as f64;
    let stats = PathStats {
        n_paths: config.n_paths,
        n_steps: config.n_steps,
        mean_terminal_wealth: mean,
        var_terminal_wealth: var,
        mean_log_terminal_wealth: mean_log,
        se_log_terminal_wealth: se_log,
        nonpositive_terminal: nonpositive,
        regime_occupancy: RegimeOccupancy {
            borrow: regimes[0] as f64 / total,
            constrained: regimes[1] as f64 / total,
            deposit: regimes[2] as f64 / total,
        },
        floor_hits,
        clip_events,
        liquidations,
        linear_fallbacks: fallbacks,
    };
    Ok(SimulationRun {
        stats,
        terminal_wealth,
    })
}

pub fn simulate_paths<P>(policy: &P, config: &SimConfig, params: &MarketParams) -> Result<PathStats>
where
    P: Fn(&StatePoint) -> Result<PolicyDecision> + Sync,
{
    run_paths(policy, config, params).map(|run| run.stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogUtilityEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of `ln V(T)`.
pub fn expected_log_utility<P>(
    policy: &P,
    config: &SimConfig,
    params: &MarketParams,
) -> Result<LogUtilityEstimate>
where
    P: Fn(&StatePoint) -> Result<PolicyDecision> + Sync,
{
    if config.t0 == params.horizon {
        if !(config.v0 > 0.0) {
            return Err(Error::NonPositiveWealth { paths: (0..config.n_paths).collect() });
        }
        return Ok(LogUtilityEstimate {
            estimate: config.v0.ln(),
            std_error: 0.0,
        });
    }
    let run = run_paths(policy, config, params)?;
    let bad: Vec<usize> = run
        .terminal_wealth
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > 0.0))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonPositiveWealth { paths: bad });
    }
    let (estimate, std_error) = (
        run.stats.mean_log_terminal_wealth.unwrap_or(f64::NAN),
        run.stats.se_log_terminal_wealth.unwrap_or(f64::NAN),
    );
    Ok(LogUtilityEstimate { estimate, std_error })
}

/// Keeps everything in the bank: `y = 0`, free wealth deposited (or
/// borrowed when negative).
pub fn riskless_policy(params: MarketParams) -> impl Fn(&StatePoint) -> Result<PolicyDecision> + Sync {
    move |state| Ok(crate::policy::complete_decision(state, 0.0, &params))
}
