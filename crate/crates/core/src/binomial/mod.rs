//! Binomial probabilities in log space, with an exact rational path for small `n`.
//!
//! The log PMF uses the saddle-point form `stirlerr`/`bd0` so that it keeps full
//! relative accuracy for large `n`; tails are summed from the smaller side with
//! compensated summation, starting at the largest term.

pub mod exact;
mod fit;

use serde::{Deserialize, Serialize};

use crate::numeric::{ln_one_minus_exp, CompensatedSum};
use crate::{Error, Result};

pub use exact::ExactTheta;
pub use fit::{
    binomial_grid, fit_binomial_lower, fit_constant, write_binomial_report, BinomialGridSpec,
    BinomialPoint, BinomialReportRow, ConstantFit, FitOptions,
};

/// Largest `n` routed through the exact rational path by [`binom_tail`].
pub const EXACT_MAX_N: u64 = 30;

/// A tail question `P{Bin(n,θ) ≥ k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomQuery {
    pub n: u64,
    pub theta: f64,
    pub k: u64,
}

impl BinomQuery {
    pub fn new(n: u64, theta: f64, k: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::param("theta", format!("{theta} is outside (0, 1)")));
        }
        if k > n {
            return Err(Error::param("k", format!("{k} exceeds n = {n}")));
        }
        Ok(Self { n, theta, k })
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) − ((n + ½)ln n − n + ½ ln 2π)` for integer `n`.
fn stirlerr(n: u64) -> f64 {
    if n <= 15 {
        // n! is exact in f64 here, so the difference loses only a few ulps.
        let nf = n as f64;
        let ln_fact = (1..=n).map(|i| i as f64).product::<f64>().ln();
        if n == 0 {
            return ln_fact - LN_SQRT_2PI;
        }
        return ln_fact - (nf + 0.5) * nf.ln() + nf - LN_SQRT_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    let nn = nf * nf;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
}

/// Deviance term `x ln(x/m) + m − x`, evaluated without cancellation.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln P{Bin(n,θ) = k}`.
pub fn ln_pmf(n: u64, theta: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    if k == 0 {
        return nf * (-theta).ln_1p();
    }
    if k == n {
        return nf * theta.ln();
    }
    let kf = k as f64;
    let rest = nf - kf;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * theta) - bd0(rest, nf * (1.0 - theta));
    let lf = 2.0 * std::f64::consts::PI * kf * (rest / nf);
    lc - 0.5 * lf.ln()
}

pub fn pmf(n: u64, theta: f64, k: u64) -> f64 {
    ln_pmf(n, theta, k).exp()
}

/// Sum of `P{X = j}` for `j = start, start ± 1, …` relative to the first term.
/// Returns `(ln first term, Σ ratio)`.
fn relative_run(n: u64, theta: f64, start: u64, upward: bool) -> (f64, f64) {
    let ln_first = ln_pmf(n, theta, start);
    let odds = theta / (1.0 - theta);
    let mut sum = CompensatedSum::new();
    let mut term = 1.0;
    let mut j = start;
    loop {
        sum.add(term);
        if upward {
            if j == n {
                break;
            }
            term *= (n - j) as f64 / (j + 1) as f64 * odds;
            j += 1;
        } else {
            if j == 0 {
                break;
            }
            term *= j as f64 / (n - j + 1) as f64 / odds;
            j -= 1;
        }
        if term < 1e-18 * sum.value() {
            break;
        }
    }
    (ln_first, sum.value())
}

/// `ln P{Bin(n,θ) ≥ k}` in log space.
pub fn ln_tail(n: u64, theta: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k as f64 >= n as f64 * theta {
        let (ln_first, rel) = relative_run(n, theta, k, true);
        ln_first + rel.ln()
    } else {
        ln_one_minus_exp(ln_lower(n, theta, k - 1))
    }
}

/// `ln P{Bin(n,θ) ≤ m}` summed directly (caller ensures the side is small or
/// accuracy of the direct sum is sufficient).
fn ln_lower(n: u64, theta: f64, m: u64) -> f64 {
    let (ln_first, rel) = relative_run(n, theta, m, false);
    ln_first + rel.ln()
}

/// `ln P{Bin(n,θ) ≤ m}`.
pub fn ln_cdf(n: u64, theta: f64, m: u64) -> f64 {
    if m >= n {
        return 0.0;
    }
    if (m as f64) < n as f64 * theta {
        ln_lower(n, theta, m)
    } else {
        ln_one_minus_exp(ln_tail(n, theta, m + 1))
    }
}

/// `P{Bin(n,θ) ≥ k}`: exact rational path for `n ≤ 30`, log space otherwise.
pub fn binom_tail(q: BinomQuery) -> f64 {
    if q.n <= EXACT_MAX_N {
        let th = ExactTheta::from_f64(q.theta).expect("validated theta");
        crate::measures::ratio_to_f64(&exact::tail_exact(q.n, &th, q.k))
    } else {
        ln_tail(q.n, q.theta, q.k).exp()
    }
}

/// Lower median: the smallest `m` with `P{Bin(n,θ) ≤ m} ≥ 1/2`.
///
/// Comparisons within `1e−10` of one half are settled in exact arithmetic.
pub fn binom_median(n: u64, theta: f64) -> Result<u64> {
    BinomQuery::new(n, theta, 0)?;
    let exact_theta = ExactTheta::from_f64(theta)?;
    let at_least_half = |m: u64| -> bool {
        if m >= n {
            return true;
        }
        let c = ln_cdf(n, theta, m).exp();
        if (c - 0.5).abs() > 1e-10 {
            c > 0.5
        } else {
            exact::cdf_at_least_half(n, &exact_theta, m)
        }
    };
    let mut m = ((n as f64 * theta).floor() as u64).min(n);
    if at_least_half(m) {
        while m > 0 && at_least_half(m - 1) {
            m -= 1;
        }
    } else {
        while !at_least_half(m) {
            m += 1;
        }
    }
    Ok(m)
}

/// `KL(a ∥ b)` between Bernoulli laws, with `0·ln 0 = 0`.
pub fn bernoulli_kl(a: f64, b: f64) -> f64 {
    let left = if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    let right = if a < 1.0 { (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln() } else { 0.0 };
    left + right
}

/// `ln` of the Chernoff bound `exp(−n·KL(k/n ∥ θ))`; zero when `k ≤ nθ`.
pub fn ln_chernoff_upper(q: BinomQuery) -> f64 {
    let nf = q.n as f64;
    if q.k as f64 <= nf * q.theta {
        return 0.0;
    }
    if q.k == q.n {
        return nf * q.theta.ln();
    }
    -nf * bernoulli_kl(q.k as f64 / nf, q.theta)
}

pub fn chernoff_upper(q: BinomQuery) -> f64 {
    ln_chernoff_upper(q).exp()
}

/// `⌈s⌉`, treating values within relative `1e−12` above an integer as that integer.
pub fn threshold_ceil(s: f64) -> u64 {
    (s - 1e-12 * s.abs().max(1.0)).ceil().max(0.0) as u64
}

/// `ln` of `(1/C_b)·exp(−C_b·log(2 + (θn+r)/(θn))·r²/(θn+r))`.
///
/// The hypotheses `θ ∈ [1/(c_b n), c_b]` and `0 ≤ r ≤ n − θn` are checked.
pub fn ln_paper_lower_envelope(n: u64, theta: f64, r: f64, big_c: f64, c_b: f64) -> Result<f64> {
    let nf = n as f64;
    let slack = 1e-12;
    if theta < (1.0 - slack) / (c_b * nf) || theta > c_b * (1.0 + slack) {
        return Err(Error::Hypothesis(format!(
            "theta = {theta} outside [1/(c_b n), c_b] with c_b = {c_b}, n = {n}"
        )));
    }
    let mean = theta * nf;
    if r < 0.0 || r > (nf - mean) * (1.0 + slack) {
        return Err(Error::Hypothesis(format!("r = {r} outside [0, n − θn]")));
    }
    if !(big_c > 0.0) {
        return Err(Error::param("C_b", format!("{big_c} must be positive")));
    }
    Ok(-big_c.ln() - big_c * envelope_exponent(mean, r))
}

/// `log(2 + (θn+r)/(θn))·r²/(θn+r)`.
pub(crate) fn envelope_exponent(mean: f64, r: f64) -> f64 {
    (2.0 + (mean + r) / mean).ln() * r * r / (mean + r)
}

pub fn paper_lower_envelope(n: u64, theta: f64, r: f64, big_c: f64, c_b: f64) -> Result<f64> {
    ln_paper_lower_envelope(n, theta, r, big_c, c_b).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let q = BinomQuery::new(4, 0.5, 2).unwrap();
        assert_eq!(binom_tail(q), 0.6875);
        assert!((ln_tail(4, 0.5, 2).exp() - 0.6875).abs() < 1e-15);
        assert_eq!(binom_tail(BinomQuery::new(10, 0.3, 0).unwrap()), 1.0);
        let t = binom_tail(BinomQuery::new(10, 0.1, 5).unwrap());
        assert!((t - 1.6349e-3).abs() < 1e-7, "{t}");
    }

    #[test]
    fn stirlerr_branches_agree() {
        // Series branch at n = 16 against the direct formula.
        let nf = 16.0f64;
        let ln_fact: f64 = (1..=16).map(|i| (i as f64).ln()).sum();
        let direct = ln_fact - (nf + 0.5) * nf.ln() + nf - LN_SQRT_2PI;
        assert!((stirlerr(16) - direct).abs() < 1e-14);
    }

    #[test]
    fn pmf_sums_to_one_large_n() {
        for (n, th) in [(1000u64, 0.3), (50_000, 0.001), (100_000, 0.05)] {
            let s: CompensatedSum = (0..=n).map(|k| pmf(n, th, k)).collect();
            assert!((s.value() - 1.0).abs() < 1e-13, "n={n} θ={th} sum={}", s.value());
        }
    }

    #[test]
    fn medians() {
        assert_eq!(binom_median(10, 0.3).unwrap(), 3);
        assert_eq!(binom_median(1, 0.5).unwrap(), 0);
        assert_eq!(binom_median(100, 0.5).unwrap(), 50);
        assert_eq!(binom_median(7, 0.5).unwrap(), 3);
    }

    #[test]
    fn chernoff_examples() {
        let q = BinomQuery::new(10, 0.1, 5).unwrap();
        let c = chernoff_upper(q);
        assert!((c - (-10.0 * bernoulli_kl(0.5, 0.1)).exp()).abs() < 1e-18);
        assert!((c - 6.05e-3).abs() < 1e-5, "{c}");
        assert!(c >= binom_tail(q));
        let q = BinomQuery::new(20, 0.3, 20).unwrap();
        assert_eq!(ln_chernoff_upper(q), 20.0 * 0.3f64.ln());
        assert_eq!(chernoff_upper(BinomQuery::new(100, 0.5, 50).unwrap()), 1.0);
    }

    #[test]
    fn envelope_examples() {
        assert!((paper_lower_envelope(1000, 0.05, 0.0, 7.0, 0.1).unwrap() - 1.0 / 7.0).abs() < 1e-16);
        // θn = 100, θn + r = 200: log(2 + 2)·100²/200 = 50·log 4.
        let v = ln_paper_lower_envelope(10_000, 0.01, 100.0, 10.0, 0.1).unwrap();
        let expected = -(10f64).ln() - 10.0 * 50.0 * 4f64.ln();
        assert!((v - expected).abs() < 1e-10);
        assert!((10.0 * 50.0 * 4f64.ln() - 693.147).abs() < 1e-3);
        assert!(matches!(
            ln_paper_lower_envelope(1000, 0.2, 1.0, 2.0, 0.1),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            ln_paper_lower_envelope(1000, 0.001, 1.0, 2.0, 0.1),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn threshold_snapping() {
        assert_eq!(threshold_ceil(200.0), 200);
        assert_eq!(threshold_ceil(200.0 + 1e-13), 200);
        assert_eq!(threshold_ceil(200.0 + 1e-7), 201);
        assert_eq!(threshold_ceil(0.3), 1);
    }
}
