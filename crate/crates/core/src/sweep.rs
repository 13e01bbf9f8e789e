//! One-parameter scans of the optimal policy and their CSV form.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::market::{MarketParams, StatePoint};
use crate::policy::{optimal_policy, Regime};
use crate::verification::linspace;

pub const CSV_HEADER: &str = "parameter_value,y_star,regime,l,b";

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "v")]
    V,
    #[serde(rename = "R")]
    R,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "t")]
    T,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(SweepParameter::Sigma),
            "v" => Ok(SweepParameter::V),
            "R" => Ok(SweepParameter::R),
            "s" => Ok(SweepParameter::S),
            "t" => Ok(SweepParameter::T),
            other => Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (expected sigma, v, R, s or t)"
            ))),
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::V => "v",
            SweepParameter::R => "R",
            SweepParameter::S => "s",
            SweepParameter::T => "t",
        })
    }
}

/// Figure-shaped scans of the published numerical study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `sigma` in `[1, 2.4]` at `v = 500`, `t = 5`.
    Fig1,
    /// `sigma` in `[1, 2.4]` at `v = 1200`, `t = 5`.
    Fig2,
    /// `v` in `[500, 1200]` at `sigma = 0.2`, `t = 5`.
    Fig3,
    /// `R` over a user-chosen range at a user-chosen state.
    Fig5,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig5" => Ok(Preset::Fig5),
            "fig4" => Err(Error::Config("μ undefined in model; Fig. 4 out of scope".into())),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

pub const PRESET_TIME: f64 = 5.0;
pub const PRESET_POINTS: usize = 15;
pub const SIGMA_RANGE: (f64, f64) = (1.0, 2.4);
pub const WEALTH_RANGE: (f64, f64) = (500.0, 1200.0);
pub const FIG3_SIGMA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    /// State at which the policy is evaluated; the swept coordinate is
    /// overwritten pointwise.
    pub fixed_state: StatePoint,
    /// Volatility override applied before sweeping.
    pub sigma: Option<f64>,
    pub preset: Option<Preset>,
}

impl SweepSpec {
    pub fn new(
        parameter: SweepParameter,
        from: f64,
        to: f64,
        points: usize,
        fixed_state: StatePoint,
    ) -> Result<Self> {
        let spec = SweepSpec {
            parameter,
            from,
            to,
            points,
            fixed_state,
            sigma: None,
            preset: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Preset scan at asset price `s`. The R scan has no published range;
    /// use [`SweepSpec::fig5`].
    pub fn preset(preset: Preset, s: f64) -> Result<Self> {
        let state = |v| StatePoint { t: PRESET_TIME, s, v };
        let (parameter, (from, to), fixed_state, sigma) = match preset {
            Preset::Fig1 => (SweepParameter::Sigma, SIGMA_RANGE, state(500.0), None),
            Preset::Fig2 => (SweepParameter::Sigma, SIGMA_RANGE, state(1200.0), None),
            Preset::Fig3 => (SweepParameter::V, WEALTH_RANGE, state(WEALTH_RANGE.0), Some(FIG3_SIGMA)),
            Preset::Fig5 => {
                return Err(Error::Config(
                    "fig5 needs an explicit R range and wealth (--from, --to, --v)".into(),
                ))
            }
        };
        let spec = SweepSpec {
            parameter,
            from,
            to,
            points: PRESET_POINTS,
            fixed_state,
            sigma,
            preset: Some(preset),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Loan-rate scan over `[from, to]` at `(t = 5, s, v)`.
    pub fn fig5(from: f64, to: f64, points: usize, s: f64, v: f64) -> Result<Self> {
        let mut spec = SweepSpec::new(
            SweepParameter::R,
            from,
            to,
            points,
            StatePoint { t: PRESET_TIME, s, v },
        )?;
        spec.preset = Some(Preset::Fig5);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to) {
            return Err(domain(format!(
                "sweep range needs from < to, got [{}, {}]",
                self.from, self.to
            )));
        }
        if self.points < 2 {
            return Err(domain(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.from, self.to, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub y_star: f64,
    pub regime: Regime,
    pub l: f64,
    pub b: f64,
}

/// Optimal decision at every grid point of `spec`.
pub fn run_sweep(spec: &SweepSpec, params: &MarketParams) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let base = match spec.sigma {
        Some(sigma) => params.with_volatility(sigma)?,
        None => *params,
    };
    spec.grid()
        .into_iter()
        .map(|x| {
            let mut p = base;
            let mut state = spec.fixed_state;
            match spec.parameter {
                SweepParameter::Sigma => p = base.with_volatility(x)?,
                SweepParameter::R => p = base.with_loan_rate(x)?,
                SweepParameter::V => state.v = x,
                SweepParameter::S => state.s = x,
                SweepParameter::T => state.t = x,
            }
            let state = StatePoint::new(state.t, state.s, state.v, &p)?;
            let d = optimal_policy(&state, &p)?;
            Ok(SweepRow {
                parameter_value: x,
                y_star: d.y,
                regime: d.regime,
                l: d.l,
                b: d.b,
            })
        })
        .collect()
}

/// Formats `x` with 12 significant digits, trailing zeros removed, in the
/// manner of C's `%.12g`.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa.to_string()), exp.abs())
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the header and one line per row.
pub fn emit_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_g12(row.parameter_value),
            format_g12(row.y_star),
            row.regime,
            format_g12(row.l),
            format_g12(row.b)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(Error::Config(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Config(format!("CSV line {}: expected 5 fields", i + 2)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("CSV line {}: {e}", i + 2)))
            };
            Ok(SweepRow {
                parameter_value: num(fields[0])?,
                y_star: num(fields[1])?,
                regime: fields[2].parse()?,
                l: num(fields[3])?,
                b: num(fields[4])?,
            })
        })
        .collect()
}
