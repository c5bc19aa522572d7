//! Scalar pieces of the convex-distance exponential-moment argument.

use rayon::prelude::*;
use serde::Serialize;

use crate::convex_distance::{dist_c, PointSet};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Value and minimizer of `min_{λ∈[0,1]} −λb − (1−λ)a + c₀R²(1−λ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinBasic {
    pub value: f64,
    pub lambda_star: f64,
}

/// Closed-form minimization for `b ≤ a` (`b = −∞` allowed); `c0r2 = c₀R² > 0`.
pub fn min_basic(a: f64, b: f64, c0r2: f64) -> Result<MinBasic> {
    if a.is_nan() || b.is_nan() || !a.is_finite() {
        return Err(Error::NonFinite(format!("a = {a}, b = {b}")));
    }
    if b > a {
        return Err(Error::param("b", format!("{b} exceeds a = {a}")));
    }
    if !(c0r2 > 0.0 && c0r2.is_finite()) {
        return Err(Error::param("c0R^2", format!("{c0r2} must be positive")));
    }
    let gap = a - b;
    if gap >= 2.0 * c0r2 {
        Ok(MinBasic { value: -a + c0r2, lambda_star: 0.0 })
    } else {
        Ok(MinBasic { value: -b - gap * gap / (4.0 * c0r2), lambda_star: 1.0 - gap / (2.0 * c0r2) })
    }
}

/// `H(t, y)` in terms of `h(t)`, `h(y)`, `κ` and `dt = y − t`.
///
/// At `dt = 0` the value is `−max(h_t, h_y)`, the minimum of the linear part.
pub fn h_cost(h_t: f64, h_y: f64, kappa: f64, dt: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("{kappa} must be positive")));
    }
    if ![h_t, h_y, dt].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("h_t = {h_t}, h_y = {h_y}, dt = {dt}")));
    }
    let q = kappa * dt * dt;
    let diff = h_y - h_t;
    if q == 0.0 {
        return Ok(-h_t.max(h_y));
    }
    Ok(if diff >= 2.0 * q {
        -h_y + q
    } else if diff >= 0.0 {
        -h_t - diff * diff / (4.0 * q)
    } else {
        -h_t
    })
}

/// `−h(y) + Q·log(2 − exp((h(t) − h(y))/Q))`, an upper bound for `H(t, y)`
/// when `h(y) ≥ h(t)` and `Q ≥ 4κ(y − t)²`.
pub fn remark_bound(h_t: f64, h_y: f64, kappa: f64, dt: f64, q: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("{kappa} must be positive")));
    }
    if h_y < h_t {
        return Err(Error::Hypothesis(format!("h(y) = {h_y} is below h(t) = {h_t}")));
    }
    if !(q > 0.0) || q < 4.0 * kappa * dt * dt {
        return Err(Error::Hypothesis(format!("Q = {q} is below 4κ(y−t)² = {}", 4.0 * kappa * dt * dt)));
    }
    let x = (h_t - h_y) / q;
    // log(2 − e^x) = log1p(1 − e^x)
    Ok(-h_y + q * (-x.exp_m1()).ln_1p())
}

/// `L = sqrt(512 K² log(2 + n/log(2 + 1/δ)))`.
pub fn choice_of_l(n: u64, delta: f64, k: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Hypothesis(format!("delta = {delta} outside (0, 1/2]")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::param("K", format!("{k} must be positive")));
    }
    let inner = 2.0 + n as f64 / (2.0 + 1.0 / delta).ln();
    Ok((512.0 * inner.ln()).sqrt() * k)
}

/// Mean of `exp(d²/L²)` with a normal-approximation 99% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpMomentEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: u64,
    /// Largest `d²/L²` seen.
    pub max_log_term: f64,
}

impl ExpMomentEstimate {
    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Largest exponent accepted before a term is reported as overflowing.
pub const MAX_LOG_TERM: f64 = 700.0;

/// Estimate from distances with multiplicities, summed in the given order.
pub fn exp_moment_from_counts(dist_counts: &[(f64, u64)], l: f64) -> Result<ExpMomentEstimate> {
    if !(l > 0.0) {
        return Err(Error::param("L", format!("{l} must be positive")));
    }
    let total: u64 = dist_counts.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return Err(Error::param("samples", "no samples"));
    }
    let mut max_log = 0.0f64;
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for &(d, c) in dist_counts {
        if c == 0 {
            continue;
        }
        let lt = (d / l).powi(2);
        if lt > MAX_LOG_TERM {
            return Err(Error::Overflow(format!("exp({lt}) for distance {d} and L = {l}")));
        }
        max_log = max_log.max(lt);
        let term = lt.exp();
        s1.add(c as f64 * term);
        s2.add(c as f64 * term * term);
    }
    let n = total as f64;
    let mean = s1.value() / n;
    let var = if total > 1 { ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(ExpMomentEstimate { mean, half_width: Z_99 * (var / n).sqrt(), samples: total, max_log_term: max_log })
}

/// Empirical mean of `exp(dist^c(x, A)²/L²)` over `samples`.
pub fn exp_moment_statistic(samples: &[Vec<f64>], a: &PointSet, l: f64) -> Result<ExpMomentEstimate> {
    let dists = samples
        .par_iter()
        .map(|x| dist_c(x, a).map(|c| (c.distance, 1u64)))
        .collect::<Result<Vec<_>>>()?;
    exp_moment_from_counts(&dists, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_basic_examples() {
        let r = min_basic(1.0, 0.0, 1.0).unwrap();
        assert_eq!((r.value, r.lambda_star), (-0.25, 0.5));
        let r = min_basic(2.0, 2.0, 0.37).unwrap();
        assert_eq!((r.value, r.lambda_star), (-2.0, 1.0));
        let r = min_basic(3.0, 0.0, 1.0).unwrap();
        assert_eq!((r.value, r.lambda_star), (-2.0, 0.0));
        let r = min_basic(3.0, f64::NEG_INFINITY, 1.0).unwrap();
        assert_eq!((r.value, r.lambda_star), (-2.0, 0.0));
        assert!(min_basic(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn h_cost_examples() {
        assert_eq!(h_cost(0.0, 1.0, 1.0, 1.0).unwrap(), -0.25);
        assert_eq!(h_cost(5.0, 1.0, 1.0, 1.0).unwrap(), -5.0);
        assert_eq!(h_cost(0.0, 3.0, 1.0, 1.0).unwrap(), -2.0);
        assert_eq!(h_cost(0.5, 3.0, 1.0, 0.0).unwrap(), -3.0);
    }

    #[test]
    fn remark_examples() {
        assert_eq!(remark_bound(1.5, 1.5, 1.0, 0.0, 1.0).unwrap(), -1.5);
        let v = remark_bound(0.0, 1.0, 1.0, 1.0, 4.0).unwrap();
        let direct = -1.0 + 4.0 * (2.0 - (-0.25f64).exp()).ln();
        assert!((v - direct).abs() < 1e-15);
        assert!((v + 0.2006666).abs() < 1e-6);
        assert!(v >= h_cost(0.0, 1.0, 1.0, 1.0).unwrap());
        let far = remark_bound(0.3, 1.0, 1.0, 1.0, 1e6).unwrap();
        assert!((far + 0.3).abs() < 1e-6);
        assert!(remark_bound(1.0, 0.0, 1.0, 1.0, 4.0).is_err());
        assert!(remark_bound(0.0, 1.0, 1.0, 1.0, 3.9).is_err());
    }

    #[test]
    fn choice_of_l_examples() {
        let l = choice_of_l(100, 0.5, 1.0).unwrap();
        assert!((l * l - 512.0 * (2.0 + 100.0 / 4f64.ln()).ln()).abs() < 1e-9);
        assert!((l * l - 2204.6).abs() < 0.1);
        assert!((l - 46.95).abs() < 0.01);
        assert!((choice_of_l(100, 0.5, 2.0).unwrap() - 2.0 * l).abs() < 1e-12);
        let l1 = choice_of_l(1, 0.5, 1.0).unwrap();
        assert!((l1 * l1 - 512.0 * (2.0 + 1.0 / 4f64.ln()).ln()).abs() < 1e-10);
        assert!(choice_of_l(10, 0.6, 1.0).is_err());
        assert!(choice_of_l(10, 0.0, 1.0).is_err());
    }

    #[test]
    fn statistic_examples() {
        let a = PointSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let inside = exp_moment_statistic(&[vec![0.0, 0.0], vec![0.0, 0.0]], &a, 1.0).unwrap();
        assert_eq!(inside.mean, 1.0);
        let one = exp_moment_statistic(&[vec![3.0, 4.0]], &a, 5.0).unwrap();
        assert!((one.mean - std::f64::consts::E).abs() < 1e-14);
        let two = exp_moment_statistic(&[vec![0.0, 0.0], vec![3.0, 4.0]], &a, 5.0).unwrap();
        assert!((two.mean - (1.0 + std::f64::consts::E) / 2.0).abs() < 1e-14);
        assert!(matches!(
            exp_moment_statistic(&[vec![300.0, 400.0]], &a, 1.0),
            Err(Error::Overflow(_))
        ));
    }
}
