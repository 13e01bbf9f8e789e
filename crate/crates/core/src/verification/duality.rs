use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::market::MarketParams;
use crate::policy::phi;

/// A function tabulated on a grid of abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(domain(format!(
                "sampled function needs matching nonempty grids, got {} and {}",
                xs.len(),
                values.len()
            )));
        }
        Ok(SampledFunction { xs, values })
    }

    pub fn tabulate(xs: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let values = xs.iter().map(|&x| f(x)).collect();
        SampledFunction { xs, values }
    }
}

fn check_dual(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("dual variable must be positive, got z = {z}")))
    }
}

/// `max_x u(x) - z x` over the sample points.
pub fn legendre_transform(u: &SampledFunction, z: f64) -> Result<f64> {
    check_dual(z)?;
    Ok(u
        .xs
        .iter()
        .zip(&u.values)
        .map(|(x, ux)| ux - z * x)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Recovers `u(x)` as `min_z L(z) + z x`, with `L` the transform of `u`
/// evaluated on `z_grid`.
pub fn biconjugate(u: &SampledFunction, z_grid: &[f64], x_points: &[f64]) -> Result<Vec<f64>> {
    let dual = z_grid
        .iter()
        .map(|&z| legendre_transform(u, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(x_points
        .iter()
        .map(|&x| {
            z_grid
                .iter()
                .zip(&dual)
                .map(|(z, l)| l + z * x)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Closed-form transform of `ln`: `-ln z - 1`.
pub fn log_dual(z: f64) -> Result<f64> {
    check_dual(z)?;
    Ok(-z.ln() - 1.0)
}

/// `1/z + phi(t, r)`: the wealth whose deposit-rate effective wealth is `1/z`.
pub fn dual_wealth(t: f64, z: f64, params: &MarketParams) -> Result<f64> {
    check_dual(z)?;
    Ok(1.0 / z + phi(t, params.deposit_rate, params)?)
}
