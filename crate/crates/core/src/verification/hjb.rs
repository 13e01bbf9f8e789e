use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::{MarketParams, StatePoint};
use crate::policy::risk_premium;

/// Relative finite-difference step, floored at [`FD_FLOOR`].
pub const FD_RELATIVE_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-8;
/// Floor for the time step. Time has no natural magnitude near `t = 0`, and
/// a 1e-8 step there leaves `h_t` dominated by rounding.
pub const FD_TIME_FLOOR: f64 = 1e-4;

/// First and second partial derivatives of a field `H(t, s, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub h_t: f64,
    pub h_s: f64,
    pub h_v: f64,
    pub h_ss: f64,
    pub h_vv: f64,
    pub h_vs: f64,
}

fn step(x: f64, floor: f64) -> f64 {
    (FD_RELATIVE_STEP * x.abs()).max(floor)
}

/// Central-difference partials of `h` at `state`.
pub fn fd_partials<H>(h: &H, state: &StatePoint) -> Result<Partials>
where
    H: Fn(f64, f64, f64) -> f64,
{
    let StatePoint { t, s, v } = *state;
    let (dt, ds, dv) = (step(t, FD_TIME_FLOOR), step(s, FD_FLOOR), step(v, FD_FLOOR));
    let eval = |t: f64, s: f64, v: f64| {
        let value = h(t, s, v);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(domain(format!(
                "field is not finite at (t={t}, s={s}, v={v}); state too close to a singularity"
            )))
        }
    };
    let centre = eval(t, s, v)?;
    let (t_hi, t_lo) = (eval(t + dt, s, v)?, eval(t - dt, s, v)?);
    let (s_hi, s_lo) = (eval(t, s + ds, v)?, eval(t, s - ds, v)?);
    let (v_hi, v_lo) = (eval(t, s, v + dv)?, eval(t, s, v - dv)?);
    let cross = eval(t, s + ds, v + dv)? - eval(t, s + ds, v - dv)? - eval(t, s - ds, v + dv)?
        + eval(t, s - ds, v - dv)?;
    Ok(Partials {
        h_t: (t_hi - t_lo) / (2.0 * dt),
        h_s: (s_hi - s_lo) / (2.0 * ds),
        h_v: (v_hi - v_lo) / (2.0 * dv),
        h_ss: (s_hi - 2.0 * centre + s_lo) / (ds * ds),
        h_vv: (v_hi - 2.0 * centre + v_lo) / (dv * dv),
        h_vs: cross / (4.0 * ds * dv),
    })
}

/// Maximizer of the HJB Hamiltonian in `y`:
///
/// ```text
/// y = -[k (theta - s) - rate s] s / sigma^2 * H_v / H_vv - s H_vs / H_vv
/// ```
pub fn foc_allocation(
    state: &StatePoint,
    rate: f64,
    h_v: f64,
    h_vv: f64,
    h_vs: f64,
    params: &MarketParams,
) -> Result<f64> {
    if h_vv == 0.0 {
        return Err(domain("H_vv = 0: the Hamiltonian is not strictly concave in y"));
    }
    let s = state.s;
    let premium = risk_premium(s, rate, params);
    Ok(-premium * s / params.volatility.powi(2) * h_v / h_vv - s * h_vs / h_vv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbResidual {
    pub value: f64,
    pub partials: Partials,
    /// `H_vv` vanished and the quotient terms were taken as zero.
    pub degenerate: bool,
}

/// Evaluates, by central differences,
///
/// ```text
/// H_t + k (theta - s) H_s + sigma^2/2 H_ss + (rate v - rate c t + c) H_v
///   - q^2 / sigma^2 * H_v^2 / H_vv - sigma^2/2 * H_vs^2 / H_vv - q H_v H_vs / H_vv
/// ```
///
/// with `q = k (theta - s) - rate s`. The quotient terms are zero when
/// `H_vv = 0`.
pub fn hjb_residual<H>(h: &H, state: &StatePoint, rate: f64, params: &MarketParams) -> Result<HjbResidual>
where
    H: Fn(f64, f64, f64) -> f64,
{
    let d = fd_partials(h, state)?;
    let StatePoint { t, s, v } = *state;
    let sigma2 = params.volatility.powi(2);
    let c = params.contribution;
    let q = risk_premium(s, rate, params);
    let linear = d.h_t
        + params.reversion * (params.long_run - s) * d.h_s
        + 0.5 * sigma2 * d.h_ss
        + (rate * v - rate * c * t + c) * d.h_v;
    let degenerate = d.h_vv == 0.0;
    let quotient = if degenerate {
        0.0
    } else {
        -q * q / sigma2 * d.h_v * d.h_v / d.h_vv
            - 0.5 * sigma2 * d.h_vs * d.h_vs / d.h_vv
            - q * d.h_v * d.h_vs / d.h_vv
    };
    Ok(HjbResidual {
        value: linear + quotient,
        partials: d,
        degenerate,
    })
}
