//! ψ_p Orlicz norms: `inf{λ > 0 : E exp(|X|^p / λ^p) ≤ 2}`.

use serde::Serialize;

use super::{check_exponent, exp_power_params, ScalarLaw};
use crate::quadrature::integrate;
use crate::{Error, Result};

const REL_TOL: f64 = 1e-13;
const QUAD_TOL: f64 = 1e-12;

/// Outcome of the norm bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiPCertificate {
    pub p: f64,
    pub norm: f64,
    /// `E exp(|X|^p / norm^p)`; equal to 1 when the norm is zero.
    pub moment_at_norm: f64,
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `∫_0^upper exp(a·s^r − s) ds`, split at the interior maximum.
fn exp_power_integral(a: f64, r: f64, upper: f64) -> f64 {
    let f = |s: f64| (a * s.powf(r) - s).exp();
    let mut cuts = vec![0.0];
    if r < 1.0 {
        let peak = (a * r).powf(1.0 / (1.0 - r));
        if peak > 0.0 && peak < upper {
            cuts.push(peak);
        }
    }
    cuts.push(upper);
    cuts.windows(2).map(|w| integrate(f, w[0], w[1], QUAD_TOL).value).sum()
}

pub(super) fn moment(law: &ScalarLaw, lambda: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    match law {
        ScalarLaw::SymmetricExpPower { p, scale } => {
            if q > *p {
                return Err(Error::UnboundedMoment(format!(
                    "exponent {q} exceeds the tail exponent {p}"
                )));
            }
            let a = (scale / lambda).powf(q);
            if q == *p {
                return Ok(if a < 1.0 { 1.0 / (1.0 - a) } else { f64::INFINITY });
            }
            // Substituting s = (t/scale)^p turns |X| into scale·s^{1/p}, s ~ Exp(1).
            let r = q / p;
            let tail_start = (2.0 * a).powf(1.0 / (1.0 - r)).max(1.0);
            let upper = tail_start + 80.0;
            Ok(exp_power_integral(a, r, upper))
        }
        ScalarLaw::Truncated { base, level } => {
            let (p, scale) = exp_power_params(base);
            let a = (scale / lambda).powf(q);
            let upper = (level / scale).powf(p);
            let w = (-upper).exp();
            let body = if q == p && a != 1.0 {
                -(-(1.0 - a) * upper).exp_m1() / (1.0 - a)
            } else {
                exp_power_integral(a, q / p, upper)
            };
            Ok(w + body)
        }
        _ => {
            let support = law.finite_support().expect("finite law");
            let ln = log_sum_exp(
                support
                    .iter()
                    .filter(|(_, w)| *w > 0.0)
                    .map(|(v, w)| w.ln() + (v.abs() / lambda).powf(q)),
            );
            Ok(ln.exp())
        }
    }
}

pub(super) fn norm(law: &ScalarLaw, p: f64) -> Result<PsiPCertificate> {
    check_exponent(p)?;
    if law.max_abs_support() == Some(0.0) {
        return Ok(PsiPCertificate { p, norm: 0.0, moment_at_norm: 1.0 });
    }
    let start = match law {
        ScalarLaw::SymmetricExpPower { scale, .. } => *scale,
        ScalarLaw::Truncated { level, .. } => *level,
        _ => law.max_abs_support().unwrap_or(1.0),
    };
    let (mut lo, mut hi) = (start, start);
    if moment(law, hi, p)? > 2.0 {
        while moment(law, hi, p)? > 2.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Overflow("ψ_p norm bracket".into()));
            }
        }
    } else {
        while moment(law, lo, p)? <= 2.0 {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(Error::NotConverged("ψ_p norm bracket collapsed".into()));
            }
        }
    }
    // Invariant: moment(lo) > 2 ≥ moment(hi).
    while hi / lo - 1.0 > REL_TOL {
        let mid = (lo * hi).sqrt();
        if moment(law, mid, p)? > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PsiPCertificate { p, norm: hi, moment_at_norm: moment(law, hi, p)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_exp_power, make_two_point};

    #[test]
    fn point_masses() {
        let zero = ScalarLaw::point_mass(0.0).unwrap();
        let c = zero.psi_p_norm(2.0).unwrap();
        assert_eq!(c.norm, 0.0);
        assert_eq!(c.moment_at_norm, 1.0);

        let one = ScalarLaw::point_mass(1.0).unwrap();
        let c = one.psi_p_norm(2.0).unwrap();
        let closed = 1.0 / 2f64.ln().sqrt();
        assert!((c.norm - closed).abs() < 1e-10 * closed);
        assert!((c.norm - 1.20112).abs() < 1e-5);
        assert!((c.moment_at_norm - 2.0).abs() < 1e-8);
    }

    #[test]
    fn two_point_norm_at_most_k() {
        for p in [1.0, 1.5, 2.0] {
            for theta in [0.5, 0.1, 0.01] {
                let law = make_two_point(theta, 1.0, p).unwrap();
                let c = law.psi_p_norm(p).unwrap();
                assert!(c.norm <= 1.0 + 1e-10, "θ={theta} p={p} norm={}", c.norm);
                assert!((c.moment_at_norm - 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn exp_power_closed_form() {
        // With matching exponents the moment is 1/(1 − (K/λ)^p).
        for p in [1.0, 1.5, 2.0] {
            let law = make_exp_power(p, 0.8).unwrap();
            let c = law.psi_p_norm(p).unwrap();
            let expected = 0.8 * 2f64.powf(1.0 / p);
            assert!((c.norm - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn exp_power_quadrature_matches_series() {
        // p = 2 law, q = 1: E exp(|X|/λ) = 1 + Σ_k Γ(k/2 + 1)/k! · λ^{-k} with K = 1.
        let law = make_exp_power(2.0, 1.0).unwrap();
        let lambda = 1.7f64;
        let mut series = 0.0;
        let mut fact = 1.0;
        for k in 0..60 {
            if k > 0 {
                fact *= k as f64;
            }
            series += gamma_half_int(k) / fact * lambda.powi(-(k as i32));
        }
        let m = law.psi_moment(lambda, 1.0).unwrap();
        assert!((m - series).abs() < 1e-10, "{m} vs {series}");
    }

    // Γ(k/2 + 1) by the half-integer recursion.
    fn gamma_half_int(k: usize) -> f64 {
        let x = k as f64 / 2.0 + 1.0;
        let (mut g, mut y) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt() / 2.0, 1.5) };
        while y < x - 0.25 {
            g *= y;
            y += 1.0;
        }
        g
    }

    #[test]
    fn exp_power_unbounded_for_larger_exponent() {
        let law = make_exp_power(1.0, 1.0).unwrap();
        assert!(matches!(law.psi_p_norm(2.0), Err(Error::UnboundedMoment(_))));
    }

    #[test]
    fn truncation_reduces_norm() {
        let base = make_exp_power(1.0, 1.0).unwrap();
        let full = base.psi_p_norm(1.0).unwrap().norm;
        let cut = base.truncate(2.0).unwrap().psi_p_norm(1.0).unwrap();
        assert!(cut.norm < full);
        assert!((cut.moment_at_norm - 2.0).abs() < 1e-8);
        // Closed form on the truncated law agrees with quadrature at q ≠ p.
        let q_law = make_exp_power(1.5, 1.0).unwrap().truncate(3.0).unwrap();
        let direct = q_law.psi_moment(2.0, 1.5).unwrap();
        let w = (-(3.0f64).powf(1.5)).exp();
        let quad = w + exp_power_integral((0.5f64).powf(1.5), 1.0, 3.0f64.powf(1.5));
        assert!((direct - quad).abs() < 1e-11);
    }
}
