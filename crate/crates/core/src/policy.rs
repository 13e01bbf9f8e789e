//! Closed-form optimal investment policy for logarithmic utility.
//!
//! The dual variable satisfies `1/z = v - c t + c T e^{rate (t - T)}`, the
//! effective wealth. Each rate (deposit `r`, loan `R`) yields a candidate
//! risky allocation
//!
//! ```text
//! Y_rate = [k (theta - s) - rate s] * D_rate * s / sigma^2
//! ```
//!
//! and the free wealth `w = v - c t` selects one of three regimes: borrow at
//! `R` when `w <= Y_R`, deposit at `r` when `w >= Y_r`, and otherwise put all
//! free wealth in the risky asset.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::{MarketParams, StatePoint};

/// Which branch of the piecewise policy applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Borrow,
    Constrained,
    Deposit,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Borrow, Regime::Constrained, Regime::Deposit];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Borrow => "Borrow",
            Regime::Constrained => "Constrained",
            Regime::Deposit => "Deposit",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Borrow" => Ok(Regime::Borrow),
            "Constrained" => Ok(Regime::Constrained),
            "Deposit" => Ok(Regime::Deposit),
            other => Err(domain(format!("unknown regime label `{other}`"))),
        }
    }
}

/// Markers attached to decisions that needed special handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyWarning {
    /// The loan-rate candidate exceeded the deposit-rate candidate; the
    /// deposit candidate was used.
    DegenerateOrdering,
    /// The requested allocation was clipped to keep the bank balance
    /// nonnegative.
    Clipped,
    /// The state lies outside the domain of the closed form (nonpositive
    /// effective wealth); the risky position was closed.
    Liquidated,
}

/// Risky allocation `y`, loan `l` and deposit `b` chosen at a state.
///
/// Satisfies `l >= 0`, `b >= 0`, `l * b = 0` and `b + y - l + c t = v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub y: f64,
    pub l: f64,
    pub b: f64,
    pub regime: Regime,
    #[serde(default)]
    pub warnings: Vec<PolicyWarning>,
}

impl PolicyDecision {
    /// `b + y - l + c t - v`; zero up to rounding for a valid decision.
    pub fn budget_residual(&self, state: &StatePoint, params: &MarketParams) -> f64 {
        self.b + self.y - self.l + params.contribution * state.t - state.v
    }

    /// Magnitude used to make the budget residual relative.
    pub fn budget_scale(&self, state: &StatePoint, params: &MarketParams) -> f64 {
        (self.b.abs() + self.y.abs() + self.l.abs() + (params.contribution * state.t).abs())
            .max(state.v.abs())
    }
}

/// `v - c t + c T e^{rate (t - T)}`, the reciprocal of the dual variable.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EffectiveWealth {
    pub d: f64,
}

fn check_time(t: f64, params: &MarketParams) -> Result<()> {
    if (0.0..=params.horizon).contains(&t) {
        Ok(())
    } else {
        Err(domain(format!("t = {t} outside [0, {}]", params.horizon)))
    }
}

/// Discounted value of the contribution stream, `c T e^{rate (t - T)}`.
pub(crate) fn contribution_value(t: f64, rate: f64, params: &MarketParams) -> f64 {
    params.contribution * params.horizon * (rate * (t - params.horizon)).exp()
}

/// `phi(t) = c t - c T e^{rate (t - T)}`, solving `phi' - rate phi + rate c t - c = 0`
/// with `phi(T) = 0`.
pub fn phi(t: f64, rate: f64, params: &MarketParams) -> Result<f64> {
    check_time(t, params)?;
    Ok(params.contribution * t - contribution_value(t, rate, params))
}

/// Price-dependent factor of the separable dual solution. The transport
/// equation it solves, with terminal value 1, has the constant solution.
pub fn f_ansatz(_s: f64) -> f64 {
    1.0
}

pub fn effective_wealth(t: f64, v: f64, rate: f64, params: &MarketParams) -> Result<EffectiveWealth> {
    check_time(t, params)?;
    Ok(EffectiveWealth {
        d: v - params.contribution * t + contribution_value(t, rate, params),
    })
}

/// `k (theta - s) - rate s`; the sign of the excess drift over `rate`.
pub fn risk_premium(s: f64, rate: f64, params: &MarketParams) -> f64 {
    params.reversion * (params.long_run - s) - rate * s
}

/// Unconstrained optimal risky holding when all cash sits at `rate`.
/// Negative values are short positions.
pub fn candidate_allocation(t: f64, s: f64, v: f64, rate: f64, params: &MarketParams) -> Result<f64> {
    if s <= 0.0 {
        return Err(domain(format!("asset price must be positive, got s = {s}")));
    }
    let d = effective_wealth(t, v, rate, params)?.d;
    Ok(risk_premium(s, rate, params) * d * s / params.volatility.powi(2))
}

/// The three-regime optimal decision at `state`.
pub fn optimal_policy(state: &StatePoint, params: &MarketParams) -> Result<PolicyDecision> {
    let StatePoint { t, s, v } = *state;
    if s <= 0.0 {
        return Err(domain(format!("asset price must be positive, got s = {s}")));
    }
    let (r, big_r) = (params.deposit_rate, params.loan_rate);
    for rate in [r, big_r] {
        let d = effective_wealth(t, v, rate, params)?.d;
        if d <= 0.0 {
            return Err(domain(format!(
                "effective wealth {d} at rate {rate} is not positive at (t={t}, v={v})"
            )));
        }
    }
    let y_loan = candidate_allocation(t, s, v, big_r, params)?;
    let y_deposit = candidate_allocation(t, s, v, r, params)?;
    let free = v - params.contribution * t;

    if y_loan > y_deposit {
        let y = y_deposit;
        let (b, l) = if free >= y { (free - y, 0.0) } else { (0.0, y - free) };
        let regime = if l > 0.0 { Regime::Borrow } else { Regime::Deposit };
        return Ok(PolicyDecision {
            y,
            l,
            b,
            regime,
            warnings: vec![PolicyWarning::DegenerateOrdering],
        });
    }

    let decision = if free <= y_loan {
        PolicyDecision {
            y: y_loan,
            l: y_loan - free,
            b: 0.0,
            regime: Regime::Borrow,
            warnings: Vec::new(),
        }
    } else if free >= y_deposit {
        PolicyDecision {
            y: y_deposit,
            l: 0.0,
            b: free - y_deposit,
            regime: Regime::Deposit,
            warnings: Vec::new(),
        }
    } else {
        PolicyDecision {
            y: free,
            l: 0.0,
            b: 0.0,
            regime: Regime::Constrained,
            warnings: Vec::new(),
        }
    };
    Ok(decision)
}

/// Admissible decision holding `y` in the risky asset at `state`: surplus
/// free wealth is deposited, a shortfall is borrowed.
pub fn complete_decision(state: &StatePoint, y: f64, params: &MarketParams) -> PolicyDecision {
    let free = state.v - params.contribution * state.t;
    let (b, l, regime) = if free > y {
        (free - y, 0.0, Regime::Deposit)
    } else if free < y {
        (0.0, y - free, Regime::Borrow)
    } else {
        (0.0, 0.0, Regime::Constrained)
    };
    PolicyDecision {
        y,
        l,
        b,
        regime,
        warnings: Vec::new(),
    }
}

/// [`optimal_policy`] where the closed form is defined. When the effective
/// wealth at either rate is not positive, the risky position is closed
/// (`y = 0`, shortfall borrowed) and the decision is marked
/// [`PolicyWarning::Liquidated`].
pub fn guarded_optimal_policy(state: &StatePoint, params: &MarketParams) -> Result<PolicyDecision> {
    if state.s <= 0.0 {
        return Err(domain(format!("asset price must be positive, got s = {}", state.s)));
    }
    let outside = [params.deposit_rate, params.loan_rate]
        .into_iter()
        .map(|rate| effective_wealth(state.t, state.v, rate, params).map(|e| e.d <= 0.0))
        .collect::<Result<Vec<_>>>()?
        .contains(&true);
    if outside {
        let mut decision = complete_decision(state, 0.0, params);
        decision.warnings.push(PolicyWarning::Liquidated);
        return Ok(decision);
    }
    optimal_policy(state, params)
}

/// `ln(v - c t + c T e^{rate (t - T)})`. With `rate = r` this is the
/// no-loan value function, with `rate = R` the loan one.
pub fn value_function(t: f64, v: f64, rate: f64, params: &MarketParams) -> Result<f64> {
    let d = effective_wealth(t, v, rate, params)?.d;
    if d <= 0.0 {
        return Err(domain(format!("log of nonpositive effective wealth {d}")));
    }
    Ok(d.ln())
}
