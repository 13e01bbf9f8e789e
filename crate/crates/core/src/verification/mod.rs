//! Numerical oracles for the closed-form solution: residuals of the
//! separation-ansatz equations, Legendre duality, first-order conditions,
//! an HJB residual diagnostic and Monte Carlo optimality checks.

mod duality;
mod hjb;
mod montecarlo;
mod report;

pub use duality::{biconjugate, dual_wealth, legendre_transform, log_dual, SampledFunction};
pub use hjb::{fd_partials, foc_allocation, hjb_residual, HjbResidual, Partials};
pub use montecarlo::{
    mc_policy_optimality, scaled_policy, value_gap, CurveFlag, PerturbationCurve, ValueGap,
};
pub use report::{run_verify, Budget, CheckResult, VerifyReport};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::MarketParams;
use crate::policy::{f_ansatz, phi};

/// Pointwise residuals of an identity over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Absolute error of the terminal condition, when the identity has one.
    pub boundary: Option<f64>,
}

impl ResidualReport {
    pub fn new(grid: Vec<f64>, residuals: Vec<f64>, tolerance: f64, boundary: Option<f64>) -> Self {
        let max_abs = residuals
            .iter()
            .chain(boundary.iter())
            .fold(0.0_f64, |m, r| if r.is_nan() { f64::NAN } else { m.max(r.abs()) });
        ResidualReport {
            grid,
            residuals,
            max_abs,
            tolerance,
            passed: max_abs <= tolerance,
            boundary,
        }
    }
}

/// Tolerance for the contribution ODE residual.
pub const PHI_ODE_TOLERANCE: f64 = 1e-12;

/// Residual of `phi' - rate phi + rate c t - c = 0` with the analytic
/// derivative `phi'(t) = c - c T rate e^{rate (t - T)}`, plus `|phi(T)|`.
pub fn phi_ode_residual(t_grid: &[f64], rate: f64, params: &MarketParams) -> Result<ResidualReport> {
    let c = params.contribution;
    let horizon = params.horizon;
    let residuals = t_grid
        .iter()
        .map(|&t| {
            let value = phi(t, rate, params)?;
            let slope = c - c * horizon * rate * (rate * (t - horizon)).exp();
            Ok(slope - rate * value + rate * c * t - c)
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary = phi(horizon, rate, params)?.abs();
    Ok(ResidualReport::new(
        t_grid.to_vec(),
        residuals,
        PHI_ODE_TOLERANCE,
        Some(boundary),
    ))
}

/// Residual of `k (theta - s) f_s + sigma^2/2 f_ss = 0` for the constant
/// ansatz, by central differences, with boundary error `|f - 1|`.
pub fn f_pde_residual(s_grid: &[f64], params: &MarketParams) -> ResidualReport {
    let residuals = s_grid
        .iter()
        .map(|&s| {
            let h = 1e-4 * s.abs().max(1.0);
            let (lo, mid, hi) = (f_ansatz(s - h), f_ansatz(s), f_ansatz(s + h));
            let f_s = (hi - lo) / (2.0 * h);
            let f_ss = (hi - 2.0 * mid + lo) / (h * h);
            params.reversion * (params.long_run - s) * f_s + 0.5 * params.volatility.powi(2) * f_ss
        })
        .collect();
    let boundary = s_grid
        .iter()
        .map(|&s| (f_ansatz(s) - 1.0).abs())
        .fold(0.0, f64::max);
    ResidualReport::new(s_grid.to_vec(), residuals, 0.0, Some(boundary))
}

/// `n` evenly spaced points covering `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `n` logarithmically spaced points covering `[a, b]`, `0 < a < b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > a) {
        return Err(domain(format!("log grid needs 0 < a < b, got [{a}, {b}]")));
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut xs: Vec<f64> = linspace(la, lb, n).into_iter().map(f64::exp).collect();
    if let Some(first) = xs.first_mut() {
        *first = a;
    }
    if n > 1 {
        xs[n - 1] = b;
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> MarketParams {
        MarketParams::new(0.03, 0.06, 0.5, 3.0, 1.5, 0.2, 20.0).unwrap()
    }

    #[test]
    fn phi_residual_vanishes() {
        let p = reference();
        let grid = linspace(0.0, 20.0, 1000);
        for rate in [0.03, 0.06] {
            let rep = phi_ode_residual(&grid, rate, &p).unwrap();
            assert!(rep.passed, "max_abs {}", rep.max_abs);
            assert!(rep.boundary.unwrap() <= 1e-15);
        }
        assert!(phi_ode_residual(&[25.0], 0.03, &p).is_err());
    }

    #[test]
    fn phi_residual_without_contributions_is_exactly_zero() {
        let p = MarketParams::new(0.03, 0.06, 0.5, 3.0, 1.5, 0.0, 20.0).unwrap();
        let rep = phi_ode_residual(&linspace(0.0, 20.0, 50), 0.03, &p).unwrap();
        assert_eq!(rep.max_abs, 0.0);
    }

    #[test]
    fn f_residual_is_zero() {
        let p = reference();
        let rep = f_pde_residual(&[0.1, 3.0, 7.5, 1e3], &p);
        assert_eq!(rep.max_abs, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn report_flags_nan() {
        let rep = ResidualReport::new(vec![0.0, 1.0], vec![0.0, f64::NAN], 1.0, None);
        assert!(rep.max_abs.is_nan());
        assert!(!rep.passed);
    }

    #[test]
    fn grids_hit_endpoints() {
        let xs = linspace(0.0, 20.0, 1000);
        assert_eq!((xs[0], xs[999]), (0.0, 20.0));
        let ys = logspace(1e-4, 1e4, 101).unwrap();
        assert_eq!((ys[0], ys[100]), (1e-4, 1e4));
        assert!((ys[50] - 1.0).abs() < 1e-12);
        assert!(logspace(0.0, 1.0, 3).is_err());
    }
}
