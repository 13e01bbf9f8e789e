//! JSON run configuration.
//!
//! A flat object with the market keys `r, R, k, theta, sigma, c, T`, the
//! start state `t0, s0, v0` and the Monte Carlo settings `paths, steps,
//! seed`. Unknown keys are rejected. `r, R, c, T` and `t0` default to the
//! published numerical study; `k, theta, sigma` and `s0` have no published
//! value and must be given.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::market::MarketParams;

pub const DEFAULT_DEPOSIT_RATE: f64 = 0.03;
pub const DEFAULT_LOAN_RATE: f64 = 0.06;
pub const DEFAULT_CONTRIBUTION: f64 = 0.2;
pub const DEFAULT_HORIZON: f64 = 20.0;
pub const DEFAULT_T0: f64 = 5.0;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    r: Option<f64>,
    #[serde(rename = "R")]
    loan: Option<f64>,
    k: Option<f64>,
    theta: Option<f64>,
    sigma: Option<f64>,
    c: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    t0: Option<f64>,
    s0: Option<f64>,
    v0: Option<f64>,
    paths: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: MarketParams,
    pub t0: f64,
    pub s0: f64,
    /// Needed only by commands that start from a wealth level.
    pub v0: Option<f64>,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Config {
    pub fn require_v0(&self) -> Result<f64> {
        self.v0
            .ok_or_else(|| Error::Config("v0 required: no paper default exists".into()))
    }
}

fn required(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| Error::Config(format!("{key} required: no paper default exists")))
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<Config> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let k = required(raw.k, "k")?;
    let theta = required(raw.theta, "theta")?;
    let sigma = required(raw.sigma, "sigma")?;
    let s0 = required(raw.s0, "s0")?;
    let params = MarketParams::new(
        raw.r.unwrap_or(DEFAULT_DEPOSIT_RATE),
        raw.loan.unwrap_or(DEFAULT_LOAN_RATE),
        k,
        theta,
        sigma,
        raw.c.unwrap_or(DEFAULT_CONTRIBUTION),
        raw.horizon.unwrap_or(DEFAULT_HORIZON),
    )?;
    let t0 = raw.t0.unwrap_or(DEFAULT_T0);
    if !(0.0..=params.horizon).contains(&t0) {
        return Err(Error::InvalidParameter {
            field: "t0",
            reason: format!("requires 0 <= t0 <= T, got {t0}"),
        });
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "s0",
            reason: format!("requires s0 > 0, got {s0}"),
        });
    }
    if let Some(v0) = raw.v0 {
        if !v0.is_finite() {
            return Err(Error::InvalidParameter {
                field: "v0",
                reason: "requires a finite value".into(),
            });
        }
    }
    Ok(Config {
        params,
        t0,
        s0,
        v0: raw.v0,
        paths: raw.paths.unwrap_or(DEFAULT_PATHS),
        steps: raw.steps.unwrap_or(DEFAULT_STEPS),
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
    })
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&std::fs::read_to_string(path)?)
}
