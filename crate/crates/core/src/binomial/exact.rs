//! Exact rational binomial arithmetic.
//!
//! With `θ = a/d` in lowest terms and `b = d − a`, the weight of `k` successes
//! is `C(n,k)·a^k·b^(n−k) / d^n`. Numerators are accumulated as integers and
//! divided by `d^n` only at the end.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::{Error, Result};

/// Success probability as an exact fraction `a/d`.
#[derive(Debug, Clone)]
pub struct ExactTheta {
    a: BigInt,
    b: BigInt,
    d: BigInt,
}

impl ExactTheta {
    /// The exact rational value of a double in `(0, 1)`.
    pub fn from_f64(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::param("theta", format!("{theta} is outside (0, 1)")));
        }
        let r = BigRational::from_float(theta).expect("finite theta");
        Ok(Self::from_ratio(&r))
    }

    pub fn from_ratio(r: &BigRational) -> Self {
        let a = r.numer().clone();
        let d = r.denom().clone();
        let b = &d - &a;
        Self { a, b, d }
    }
}

/// Integer numerators `C(n,k)·a^k·b^(n−k)` for `k` in `from..=to`, generated by
/// the exact ratio recurrence.
fn numerators(n: u64, theta: &ExactTheta, from: u64, to: u64) -> impl Iterator<Item = BigInt> + '_ {
    let binom = binomial_coefficient(n, from);
    let first = binom * Pow::pow(&theta.a, from) * Pow::pow(&theta.b, n - from);
    let mut current = first;
    (from..=to).map(move |k| {
        let out = current.clone();
        if k < to {
            // C(n,k+1) a^{k+1} b^{n−k−1} = C(n,k) a^k b^{n−k} · (n−k) a / ((k+1) b)
            let next = &current * BigInt::from(n - k) * &theta.a;
            let (q, rem) = next.div_rem(&(BigInt::from(k + 1) * &theta.b));
            debug_assert!(rem.is_zero());
            current = q;
        }
        out
    })
}

fn binomial_coefficient(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

fn denominator(n: u64, theta: &ExactTheta) -> BigInt {
    Pow::pow(&theta.d, n)
}

/// Exact `P{Bin(n,θ) = k}`.
pub fn pmf_exact(n: u64, theta: &ExactTheta, k: u64) -> BigRational {
    if k > n {
        return BigRational::zero();
    }
    let num = numerators(n, theta, k, k).next().expect("one term");
    BigRational::new(num, denominator(n, theta))
}

/// Exact `P{Bin(n,θ) ≥ k}`.
pub fn tail_exact(n: u64, theta: &ExactTheta, k: u64) -> BigRational {
    if k == 0 {
        return BigRational::one();
    }
    if k > n {
        return BigRational::zero();
    }
    let num: BigInt = numerators(n, theta, k, n).sum();
    BigRational::new(num, denominator(n, theta))
}

/// Exact `P{Bin(n,θ) ≤ m}`.
pub fn cdf_exact(n: u64, theta: &ExactTheta, m: u64) -> BigRational {
    if m >= n {
        return BigRational::one();
    }
    let num: BigInt = numerators(n, theta, 0, m).sum();
    BigRational::new(num, denominator(n, theta))
}

/// Whether `P{Bin(n,θ) ≤ m} ≥ 1/2`, decided without rounding.
pub fn cdf_at_least_half(n: u64, theta: &ExactTheta, m: u64) -> bool {
    if m >= n {
        return true;
    }
    let num: BigInt = numerators(n, theta, 0, m).sum();
    num * 2 >= denominator(n, theta)
}
