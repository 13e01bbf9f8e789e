use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    biconjugate, dual_wealth, f_pde_residual, fd_partials, foc_allocation, hjb_residual,
    legendre_transform, linspace, log_dual, logspace, mc_policy_optimality, phi_ode_residual,
    value_gap, SampledFunction,
};
use crate::error::Result;
use crate::market::{MarketParams, StatePoint};
use crate::policy::{
    candidate_allocation, contribution_value, effective_wealth, optimal_policy, value_function,
    Regime,
};

pub const TERMINAL_TOLERANCE: f64 = 1e-12;
pub const LEGENDRE_TOLERANCE: f64 = 1e-6;
pub const BICONJUGATE_TOLERANCE: f64 = 1e-5;
pub const FOC_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
/// Accepted range of the perturbation argmax.
pub const ALPHA_STAR_RANGE: (f64, f64) = (0.9, 1.1);
pub const PERTURBATION_ALPHAS: [f64; 9] = [0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4];
pub const FULL_PATHS: usize = 100_000;
pub const FULL_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Residual, duality and first-order-condition checks.
    Quick,
    /// Adds the Monte Carlo perturbation and value-gap runs.
    Full,
}

/// Outcome of one check. Diagnostics have `asserted = false` and never
/// affect the exit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub passed: bool,
    pub asserted: bool,
}

impl CheckResult {
    fn residual(max_abs: f64, tolerance: f64) -> Self {
        CheckResult {
            max_abs: Some(max_abs),
            alpha_star: None,
            gap: None,
            std_error: None,
            passed: max_abs <= tolerance,
            asserted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerifyReport {
    pub checks: BTreeMap<String, CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.values().all(|c| c.passed || !c.asserted)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x) })
}

fn terminal_conditions(params: &MarketParams, rng: &mut ChaCha8Rng) -> Result<f64> {
    let horizon = params.horizon;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let v: f64 = 10f64.powf(rng.random_range(-2.0..4.0));
        let z: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
        for rate in [params.deposit_rate, params.loan_rate] {
            worst = max_of([worst, rel_err(value_function(horizon, v, rate, params)?, v.ln())]);
        }
        worst = max_of([worst, rel_err(dual_wealth(horizon, z, params)?, 1.0 / z)]);
    }
    Ok(worst)
}

fn random_deposit_state(params: &MarketParams, rng: &mut ChaCha8Rng) -> Result<StatePoint> {
    for _ in 0..100_000 {
        let t = rng.random_range(0.0..params.horizon);
        let s = params.long_run * rng.random_range(0.05..2.0);
        let v = 10f64.powf(rng.random_range(0.0..6.0));
        let state = StatePoint { t, s, v };
        if let Ok(d) = optimal_policy(&state, params) {
            if d.regime == Regime::Deposit && d.warnings.is_empty() {
                return Ok(state);
            }
        }
    }
    Err(crate::error::domain("no deposit-regime state found for these parameters"))
}

fn foc_consistency(params: &MarketParams, rng: &mut ChaCha8Rng) -> Result<f64> {
    let r = params.deposit_rate;
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let state = random_deposit_state(params, rng)?;
        let d = effective_wealth(state.t, state.v, r, params)?.d;
        let y = foc_allocation(&state, r, 1.0 / d, -1.0 / (d * d), 0.0, params)?;
        let expected = candidate_allocation(state.t, state.s, state.v, r, params)?;
        let err = if expected == 0.0 {
            y.abs()
        } else {
            rel_err(y, expected)
        };
        worst = max_of([worst, err]);
    }
    Ok(worst)
}

fn log_value(params: MarketParams) -> impl Fn(f64, f64, f64) -> f64 {
    move |t, _s, v| {
        (v - params.contribution * t + contribution_value(t, params.deposit_rate, &params)).ln()
    }
}

/// Runs the verification suite. `state` is the start of the Monte Carlo
/// runs and the point of the HJB diagnostics.
pub fn run_verify(
    params: &MarketParams,
    state: &StatePoint,
    budget: Budget,
    seed: u64,
) -> Result<VerifyReport> {
    let mut checks = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = params.horizon;

    let t_grid = linspace(0.0, horizon, 1000);
    for (name, rate) in [("phi_ode_r", params.deposit_rate), ("phi_ode_R", params.loan_rate)] {
        let rep = phi_ode_residual(&t_grid, rate, params)?;
        checks.insert(name.to_string(), CheckResult::residual(rep.max_abs, rep.tolerance));
    }
    let s_grid = linspace(0.05 * params.long_run, 3.0 * params.long_run, 100);
    let rep = f_pde_residual(&s_grid, params);
    checks.insert("f_pde".into(), CheckResult::residual(rep.max_abs, rep.tolerance));

    checks.insert(
        "terminal_conditions".into(),
        CheckResult::residual(terminal_conditions(params, &mut rng)?, TERMINAL_TOLERANCE),
    );

    let u = SampledFunction::tabulate(logspace(1e-4, 1e4, 100_000)?, f64::ln);
    let mut legendre = 0.0_f64;
    for z in logspace(0.1, 10.0, 50)? {
        legendre = max_of([legendre, (legendre_transform(&u, z)? - log_dual(z)?).abs()]);
    }
    checks.insert("legendre".into(), CheckResult::residual(legendre, LEGENDRE_TOLERANCE));

    let xs = linspace(0.5, 5.0, 50);
    let recovered = biconjugate(&u, &logspace(0.1, 10.0, 2000)?, &xs)?;
    let bicon = max_of(xs.iter().zip(&recovered).map(|(x, u)| (u - x.ln()).abs()));
    checks.insert("biconjugate".into(), CheckResult::residual(bicon, BICONJUGATE_TOLERANCE));

    checks.insert(
        "foc_consistency".into(),
        CheckResult::residual(foc_consistency(params, &mut rng)?, FOC_TOLERANCE),
    );

    let h1 = log_value(*params);
    let fd = fd_partials(&h1, state)?;
    let d = effective_wealth(state.t, state.v, params.deposit_rate, params)?.d;
    let d_t = -params.contribution + params.deposit_rate * contribution_value(state.t, params.deposit_rate, params);
    let gradient = max_of([rel_err(fd.h_v, 1.0 / d), rel_err(fd.h_t, d_t / d)]);
    checks.insert("hjb_gradient".into(), CheckResult::residual(gradient, GRADIENT_TOLERANCE));

    let residual = hjb_residual(&h1, state, params.deposit_rate, params)?;
    checks.insert(
        "hjb_residual_h1".into(),
        CheckResult {
            max_abs: Some(residual.value.abs()),
            alpha_star: None,
            gap: None,
            std_error: None,
            passed: residual.value.is_finite(),
            asserted: false,
        },
    );

    if budget == Budget::Full {
        let curve = mc_policy_optimality(params, state, &PERTURBATION_ALPHAS, FULL_PATHS, FULL_STEPS, seed)?;
        let in_range = (ALPHA_STAR_RANGE.0..=ALPHA_STAR_RANGE.1).contains(&curve.alpha_star);
        checks.insert(
            "mc_policy_optimality".into(),
            CheckResult {
                max_abs: None,
                alpha_star: Some(curve.alpha_star),
                gap: None,
                std_error: None,
                passed: in_range && curve.unimodal,
                asserted: true,
            },
        );
        let gap = value_gap(params, state, FULL_PATHS, FULL_STEPS, seed)?;
        checks.insert(
            "value_gap".into(),
            CheckResult {
                max_abs: None,
                alpha_star: None,
                gap: Some(gap.gap),
                std_error: Some(gap.std_error),
                passed: gap.gap.is_finite() && gap.std_error.is_finite(),
                asserted: true,
            },
        );
    }
    Ok(VerifyReport { checks })
}
