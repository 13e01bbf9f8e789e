//! Market primitives: model constants, the bank account and the
//! Ornstein-Uhlenbeck risky asset
//!
//! ```text
//! dB = r B dt
//! dS = k (theta - S) dt + sigma dW
//! ```
//!
//! The exact Gaussian transition is the default stepper. The Euler scheme is
//! kept only for convergence cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// All constants of the market and of the pension plan.
///
/// Serialized with the short symbol names `r, R, k, theta, sigma, c, T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketParams", into = "RawMarketParams")]
pub struct MarketParams {
    /// Deposit rate earned by the bank account.
    pub deposit_rate: f64,
    /// Loan rate paid on borrowed funds.
    pub loan_rate: f64,
    /// Mean-reversion speed of the risky asset.
    pub reversion: f64,
    /// Long-run level the risky asset reverts to.
    pub long_run: f64,
    /// Additive volatility of the risky asset.
    pub volatility: f64,
    /// Contribution rate paid into the fund.
    pub contribution: f64,
    /// Retirement date.
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarketParams {
    r: f64,
    #[serde(rename = "R")]
    loan: f64,
    k: f64,
    theta: f64,
    sigma: f64,
    c: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

impl TryFrom<RawMarketParams> for MarketParams {
    type Error = Error;

    fn try_from(raw: RawMarketParams) -> Result<Self> {
        MarketParams::new(raw.r, raw.loan, raw.k, raw.theta, raw.sigma, raw.c, raw.horizon)
    }
}

impl From<MarketParams> for RawMarketParams {
    fn from(p: MarketParams) -> Self {
        RawMarketParams {
            r: p.deposit_rate,
            loan: p.loan_rate,
            k: p.reversion,
            theta: p.long_run,
            sigma: p.volatility,
            c: p.contribution,
            horizon: p.horizon,
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.to_string(),
    }
}

impl MarketParams {
    /// Builds a validated parameter set. Argument order follows the symbols
    /// `r, R, k, theta, sigma, c, T`.
    pub fn new(
        deposit_rate: f64,
        loan_rate: f64,
        reversion: f64,
        long_run: f64,
        volatility: f64,
        contribution: f64,
        horizon: f64,
    ) -> Result<Self> {
        let fields = [
            ("r", deposit_rate),
            ("R", loan_rate),
            ("k", reversion),
            ("theta", long_run),
            ("sigma", volatility),
            ("c", contribution),
            ("T", horizon),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if deposit_rate <= 0.0 {
            return Err(invalid("r", "requires 0 < r"));
        }
        if deposit_rate >= loan_rate {
            return Err(invalid("R", "requires r < R"));
        }
        if reversion <= 0.0 {
            return Err(invalid("k", "requires k > 0"));
        }
        if long_run <= 0.0 {
            return Err(invalid("theta", "requires theta > 0"));
        }
        if volatility <= 0.0 {
            return Err(invalid("sigma", "requires sigma > 0"));
        }
        if contribution < 0.0 {
            return Err(invalid("c", "requires c >= 0"));
        }
        if horizon <= 0.0 {
            return Err(invalid("T", "requires T > 0"));
        }
        Ok(MarketParams {
            deposit_rate,
            loan_rate,
            reversion,
            long_run,
            volatility,
            contribution,
            horizon,
        })
    }

    /// Copy with a different volatility, revalidated.
    pub fn with_volatility(&self, sigma: f64) -> Result<Self> {
        Self::new(
            self.deposit_rate,
            self.loan_rate,
            self.reversion,
            self.long_run,
            sigma,
            self.contribution,
            self.horizon,
        )
    }

    /// Copy with a different loan rate, revalidated.
    pub fn with_loan_rate(&self, loan_rate: f64) -> Result<Self> {
        Self::new(
            self.deposit_rate,
            loan_rate,
            self.reversion,
            self.long_run,
            self.volatility,
            self.contribution,
            self.horizon,
        )
    }

    /// Price floor applied by the simulator: `1e-6 * theta`.
    pub fn price_floor(&self) -> f64 {
        1e-6 * self.long_run
    }
}

/// A point `(t, s, v)` of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub t: f64,
    pub s: f64,
    pub v: f64,
}

impl StatePoint {
    /// Validated constructor: `0 <= t <= T` and `s > 0`.
    pub fn new(t: f64, s: f64, v: f64, params: &MarketParams) -> Result<Self> {
        if !(t.is_finite() && s.is_finite() && v.is_finite()) {
            return Err(domain("state coordinates must be finite"));
        }
        if !(0.0..=params.horizon).contains(&t) {
            return Err(domain(format!("t = {t} outside [0, {}]", params.horizon)));
        }
        if s <= 0.0 {
            return Err(domain(format!("asset price must be positive, got s = {s}")));
        }
        Ok(StatePoint { t, s, v })
    }
}

/// Growth factor `exp(rate * (t1 - t0))` of a bank balance.
pub fn bank_factor(t0: f64, t1: f64, rate: f64) -> Result<f64> {
    if t0 > t1 {
        return Err(domain(format!("bank_factor needs t0 <= t1, got {t0} > {t1}")));
    }
    Ok((rate * (t1 - t0)).exp())
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("time step must be positive, got dt = {dt}")))
    }
}

/// Standard deviation of the exact transition over `dt`.
fn exact_step_sd(dt: f64, params: &MarketParams) -> f64 {
    let k = params.reversion;
    params.volatility * (-(-2.0 * k * dt).exp_m1() / (2.0 * k)).sqrt()
}

/// Exact O-U transition driven by the standard normal draw `z`.
pub fn ou_exact_step(s: f64, dt: f64, z: f64, params: &MarketParams) -> Result<f64> {
    check_dt(dt)?;
    let decay = (-params.reversion * dt).exp();
    Ok(params.long_run + (s - params.long_run) * decay + exact_step_sd(dt, params) * z)
}

/// Euler-Maruyama O-U step.
pub fn ou_euler_step(s: f64, dt: f64, z: f64, params: &MarketParams) -> Result<f64> {
    check_dt(dt)?;
    Ok(s + params.reversion * (params.long_run - s) * dt + params.volatility * dt.sqrt() * z)
}

/// Mean and variance of `S(t)` given `S(0) = s0`.
pub fn ou_moments(s0: f64, t: f64, params: &MarketParams) -> Result<(f64, f64)> {
    if t < 0.0 {
        return Err(domain(format!("ou_moments needs t >= 0, got {t}")));
    }
    let k = params.reversion;
    let mean = params.long_run + (s0 - params.long_run) * (-k * t).exp();
    let variance = params.volatility.powi(2) * -(-2.0 * k * t).exp_m1() / (2.0 * k);
    Ok((mean, variance))
}

/// Discretization used for the risky-asset marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceStepper {
    #[default]
    Exact,
    Euler,
}

impl PriceStepper {
    pub fn step(self, s: f64, dt: f64, z: f64, params: &MarketParams) -> Result<f64> {
        match self {
            PriceStepper::Exact => ou_exact_step(s, dt, z, params),
            PriceStepper::Euler => ou_euler_step(s, dt, z, params),
        }
    }

    /// Conditional variance of one price increment over `dt`.
    pub fn increment_variance(self, dt: f64, params: &MarketParams) -> f64 {
        match self {
            PriceStepper::Exact => exact_step_sd(dt, params).powi(2),
            PriceStepper::Euler => params.volatility.powi(2) * dt,
        }
    }
}
