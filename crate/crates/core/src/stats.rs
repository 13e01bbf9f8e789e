//! Order-fixed summary statistics.
//!
//! Inputs arrive in path order, so results do not depend on how the paths
//! were scheduled.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Sample mean and unbiased variance (zero for fewer than two samples).
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean)));
    (mean, ss / (n - 1) as f64)
}

/// Mean and standard error of the mean.
pub fn mean_std_error(values: &[f64]) -> (f64, f64) {
    let (mean, var) = mean_variance(values);
    (mean, (var / values.len() as f64).sqrt())
}
