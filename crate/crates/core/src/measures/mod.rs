//! One-dimensional laws with exact tails, ψ_p norms and seeded samplers.
//!
//! Every law exposes `P{X ≥ t}`, `P{X > t}` and a generalized inverse CDF.
//! Finite laws keep their atom probabilities as exact rationals so that
//! truncation and total-mass checks involve no rounding.

mod config;
mod psi;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use config::LawConfig;
pub use psi::PsiPCertificate;

/// A single atom of a finite law.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: BigRational,
}

/// Finite law with exact rational probabilities, atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiscrete {
    atoms: Vec<Atom>,
    // f64 cumulative probabilities, used by the sampler only.
    cumulative: Vec<f64>,
}

impl FiniteDiscrete {
    /// Builds a finite law; duplicate values are merged and null atoms dropped.
    pub fn new(atoms: impl IntoIterator<Item = (f64, BigRational)>) -> Result<Self> {
        let mut raw: Vec<Atom> = Vec::new();
        for (value, prob) in atoms {
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("atom value {value}")));
            }
            if prob.is_negative() {
                return Err(Error::param("prob", format!("negative probability {prob}")));
            }
            raw.push(Atom { value, prob });
        }
        raw.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(raw.len());
        for atom in raw {
            match merged.last_mut() {
                Some(last) if last.value == atom.value => last.prob += atom.prob,
                _ => merged.push(atom),
            }
        }
        merged.retain(|a| !a.prob.is_zero());
        let total: BigRational = merged.iter().map(|a| a.prob.clone()).sum();
        if !total.is_one() {
            return Err(Error::param("atoms", format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = BigRational::zero();
        let mut cumulative = Vec::with_capacity(merged.len());
        for a in &merged {
            acc += &a.prob;
            cumulative.push(ratio_to_f64(&acc));
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self { atoms: merged, cumulative })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Exact total mass (always one for a constructed law).
    pub fn total_mass(&self) -> BigRational {
        self.atoms.iter().map(|a| a.prob.clone()).sum()
    }

    /// Exact `P{X ≤ t}`.
    pub fn cdf_exact(&self, t: f64) -> BigRational {
        self.atoms.iter().filter(|a| a.value <= t).map(|a| a.prob.clone()).sum()
    }

    /// Exact `P{X ≥ t}`.
    pub fn tail_exact(&self, t: f64) -> BigRational {
        self.atoms.iter().filter(|a| a.value >= t).map(|a| a.prob.clone()).sum()
    }

    fn quantile(&self, u: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < u).min(self.atoms.len() - 1);
        self.atoms[idx].value
    }

    /// Smallest atom `m` with `P{X ≤ m} ≥ 1/2`, decided in exact arithmetic.
    fn lower_median(&self) -> f64 {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut acc = BigRational::zero();
        for a in &self.atoms {
            acc += &a.prob;
            if acc >= half {
                return a.value;
            }
        }
        self.atoms[self.atoms.len() - 1].value
    }
}

/// A one-dimensional probability law.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarLaw {
    /// Mass `θ` at `α ≥ 0` and `1 − θ` at zero.
    TwoPoint { theta: f64, alpha: f64 },
    /// Symmetric law with `P{X ≥ t} = P{X ≤ −t} = ½·exp(−(t/scale)^p)`.
    SymmetricExpPower { p: f64, scale: f64 },
    FiniteDiscrete(FiniteDiscrete),
    /// Law of `X·1{|X| ≤ level}`; the base is always a continuous law.
    Truncated { base: Box<ScalarLaw>, level: f64 },
}

fn check_exponent(p: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is outside [1, 2]")));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::param(name, format!("{v} must be a positive finite number")));
    }
    Ok(())
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Two-point test law with `α = K·(log(1/θ))^{1/p}`.
pub fn make_two_point(theta: f64, k: f64, p: f64) -> Result<ScalarLaw> {
    check_exponent(p)?;
    check_positive("K", k)?;
    let alpha = k * (1.0 / theta).ln().powf(1.0 / p);
    ScalarLaw::two_point(theta, alpha)
}

/// Symmetric exponential-power law with tail `½·exp(−(t/scale)^p)`.
pub fn make_exp_power(p: f64, scale: f64) -> Result<ScalarLaw> {
    check_exponent(p)?;
    check_positive("scale", scale)?;
    Ok(ScalarLaw::SymmetricExpPower { p, scale })
}

impl ScalarLaw {
    pub fn two_point(theta: f64, alpha: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::DegenerateLaw(format!("two-point law needs 0 < θ < 1, got {theta}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::param("alpha", format!("{alpha} must be finite and nonnegative")));
        }
        Ok(ScalarLaw::TwoPoint { theta, alpha })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Ok(ScalarLaw::FiniteDiscrete(FiniteDiscrete::new([(value, BigRational::one())])?))
    }

    /// Uniform law on `{−1, 1}`.
    pub fn rademacher() -> Self {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        ScalarLaw::FiniteDiscrete(
            FiniteDiscrete::new([(-1.0, half.clone()), (1.0, half)]).expect("valid law"),
        )
    }

    pub fn finite(atoms: impl IntoIterator<Item = (f64, BigRational)>) -> Result<Self> {
        Ok(ScalarLaw::FiniteDiscrete(FiniteDiscrete::new(atoms)?))
    }

    /// Re-checks the variant invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => Self::two_point(*theta, *alpha).map(|_| ()),
            ScalarLaw::SymmetricExpPower { p, scale } => make_exp_power(*p, *scale).map(|_| ()),
            ScalarLaw::FiniteDiscrete(_) => Ok(()),
            ScalarLaw::Truncated { base, level } => {
                check_positive("level", *level)?;
                match base.as_ref() {
                    ScalarLaw::SymmetricExpPower { .. } => base.validate(),
                    _ => Err(Error::param("base", "truncated base must be a continuous law")),
                }
            }
        }
    }

    /// Law of `X·1{|X| ≤ level}`: mass outside `[−level, level]` moves to zero.
    ///
    /// Finite laws stay finite (exactly); nested truncations collapse to the
    /// smaller level.
    pub fn truncate(&self, level: f64) -> Result<ScalarLaw> {
        check_positive("level", level)?;
        match self {
            ScalarLaw::TwoPoint { alpha, .. } => {
                if *alpha <= level {
                    Ok(self.clone())
                } else {
                    ScalarLaw::point_mass(0.0)
                }
            }
            ScalarLaw::FiniteDiscrete(fd) => {
                let atoms = fd.atoms.iter().map(|a| {
                    let v = if a.value.abs() <= level { a.value } else { 0.0 };
                    (v, a.prob.clone())
                });
                ScalarLaw::finite(atoms)
            }
            ScalarLaw::SymmetricExpPower { .. } => {
                Ok(ScalarLaw::Truncated { base: Box::new(self.clone()), level })
            }
            ScalarLaw::Truncated { base, level: current } => {
                Ok(ScalarLaw::Truncated { base: base.clone(), level: current.min(level) })
            }
        }
    }

    /// `P{X ≥ t}`.
    pub fn prob_ge(&self, t: f64) -> f64 {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => {
                let mut s = 0.0;
                if t <= *alpha {
                    s += theta;
                }
                if t <= 0.0 {
                    s += 1.0 - theta;
                }
                s
            }
            ScalarLaw::SymmetricExpPower { p, scale } => {
                if t >= 0.0 {
                    0.5 * (-(t / scale).powf(*p)).exp()
                } else {
                    1.0 - 0.5 * (-(-t / scale).powf(*p)).exp()
                }
            }
            ScalarLaw::FiniteDiscrete(fd) => ratio_to_f64(&fd.tail_exact(t)),
            ScalarLaw::Truncated { base, level } => {
                let (p, scale) = exp_power_params(base);
                let w = (-(level / scale).powf(p)).exp();
                if t > *level {
                    0.0
                } else if t > 0.0 {
                    0.5 * ((-(t / scale).powf(p)).exp() - w)
                } else if t > -level {
                    1.0 - 0.5 * ((-(-t / scale).powf(p)).exp() - w)
                } else {
                    1.0
                }
            }
        }
    }

    /// `P{X > t}`.
    pub fn prob_gt(&self, t: f64) -> f64 {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => {
                let mut s = 0.0;
                if t < *alpha {
                    s += theta;
                }
                if t < 0.0 {
                    s += 1.0 - theta;
                }
                s
            }
            ScalarLaw::SymmetricExpPower { .. } => self.prob_ge(t),
            ScalarLaw::FiniteDiscrete(fd) => {
                let mass: BigRational =
                    fd.atoms.iter().filter(|a| a.value > t).map(|a| a.prob.clone()).sum();
                ratio_to_f64(&mass)
            }
            ScalarLaw::Truncated { base, level } => {
                let (p, scale) = exp_power_params(base);
                let w = (-(level / scale).powf(p)).exp();
                if t >= *level {
                    0.0
                } else if t >= 0.0 {
                    0.5 * ((-(t / scale).powf(p)).exp() - w)
                } else {
                    self.prob_ge(t)
                }
            }
        }
    }

    /// `P{X ≤ t}`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ScalarLaw::FiniteDiscrete(fd) => ratio_to_f64(&fd.cdf_exact(t)),
            _ => 1.0 - self.prob_gt(t),
        }
    }

    /// Probability of the atom at zero.
    pub fn mass_at_zero(&self) -> f64 {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    1.0 - theta
                }
            }
            ScalarLaw::SymmetricExpPower { .. } => 0.0,
            ScalarLaw::FiniteDiscrete(fd) => fd
                .atoms
                .iter()
                .find(|a| a.value == 0.0)
                .map_or(0.0, |a| ratio_to_f64(&a.prob)),
            ScalarLaw::Truncated { base, level } => {
                let (p, scale) = exp_power_params(base);
                (-(level / scale).powf(p)).exp()
            }
        }
    }

    /// Generalized inverse CDF `inf{x : P{X ≤ x} ≥ u}` for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => {
                if u <= 1.0 - theta {
                    0.0
                } else {
                    *alpha
                }
            }
            ScalarLaw::SymmetricExpPower { p, scale } => {
                if u < 0.5 {
                    let u = u.max(f64::MIN_POSITIVE);
                    -scale * (-(2.0 * u).ln()).powf(1.0 / p)
                } else if u == 0.5 {
                    0.0
                } else {
                    scale * (-(2.0 * (1.0 - u)).ln()).powf(1.0 / p)
                }
            }
            ScalarLaw::FiniteDiscrete(fd) => fd.quantile(u),
            ScalarLaw::Truncated { base, level } => {
                let (p, scale) = exp_power_params(base);
                let w = (-(level / scale).powf(p)).exp();
                if u <= 0.5 * (1.0 - w) {
                    -(scale * (-(2.0 * u + w).ln()).powf(1.0 / p)).min(*level)
                } else if u <= 0.5 * (1.0 + w) {
                    0.0
                } else {
                    (scale * (-(2.0 * (1.0 - u) + w).ln()).powf(1.0 / p)).min(*level)
                }
            }
        }
    }

    /// Lower median: the smallest `m` with `P{X ≤ m} ≥ 1/2`.
    pub fn lower_median(&self) -> f64 {
        match self {
            ScalarLaw::FiniteDiscrete(fd) => fd.lower_median(),
            _ => self.quantile(0.5),
        }
    }

    /// Largest `|x|` in the support, or `None` for unbounded laws.
    pub fn max_abs_support(&self) -> Option<f64> {
        match self {
            ScalarLaw::TwoPoint { alpha, .. } => Some(*alpha),
            ScalarLaw::SymmetricExpPower { .. } => None,
            ScalarLaw::FiniteDiscrete(fd) => {
                fd.atoms.iter().map(|a| a.value.abs()).reduce(f64::max)
            }
            ScalarLaw::Truncated { level, .. } => Some(*level),
        }
    }

    /// Finite support as `(value, probability)` pairs, if the law is finite.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => {
                if *alpha == 0.0 {
                    Some(vec![(0.0, 1.0)])
                } else {
                    Some(vec![(0.0, 1.0 - theta), (*alpha, *theta)])
                }
            }
            ScalarLaw::FiniteDiscrete(fd) => {
                Some(fd.atoms.iter().map(|a| (a.value, ratio_to_f64(&a.prob))).collect())
            }
            _ => None,
        }
    }

    /// One inverse-CDF draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `count` i.i.d. draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }

    /// `E exp(|X|^p / λ^p)`; infinite when the moment diverges.
    pub fn psi_moment(&self, lambda: f64, p: f64) -> Result<f64> {
        psi::moment(self, lambda, p)
    }

    /// ψ_p (Orlicz) norm with a bisection certificate.
    pub fn psi_p_norm(&self, p: f64) -> Result<PsiPCertificate> {
        psi::norm(self, p)
    }
}

fn exp_power_params(law: &ScalarLaw) -> (f64, f64) {
    match law {
        ScalarLaw::SymmetricExpPower { p, scale } => (*p, *scale),
        _ => unreachable!("truncated base is validated to be an exponential-power law"),
    }
}

impl fmt::Display for ScalarLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarLaw::TwoPoint { theta, alpha } => write!(f, "two-point(theta={theta}, alpha={alpha})"),
            ScalarLaw::SymmetricExpPower { p, scale } => write!(f, "exp-power(p={p}, scale={scale})"),
            ScalarLaw::FiniteDiscrete(fd) => {
                write!(f, "finite(")?;
                for (i, a) in fd.atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}:{}/{}", a.value, a.prob.numer(), a.prob.denom())?;
                }
                write!(f, ")")
            }
            ScalarLaw::Truncated { base, level } => write!(f, "truncated({base}, level={level})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn two_point_alpha_from_theta() {
        let e_inv = (-1.0f64).exp();
        for p in [1.0, 2.0] {
            match make_two_point(e_inv, 1.0, p).unwrap() {
                ScalarLaw::TwoPoint { theta, alpha } => {
                    assert_eq!(theta, e_inv);
                    assert!((alpha - 1.0).abs() < 1e-15);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        match make_two_point(0.01, 2.0, 1.0).unwrap() {
            ScalarLaw::TwoPoint { alpha, .. } => assert!((alpha - 2.0 * 100f64.ln()).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!((2.0 * 100f64.ln() - 9.2103).abs() < 1e-4);
    }

    #[test]
    fn degenerate_two_point_rejected() {
        assert!(matches!(make_two_point(0.0, 1.0, 2.0), Err(Error::DegenerateLaw(_))));
        assert!(matches!(make_two_point(1.0, 1.0, 2.0), Err(Error::DegenerateLaw(_))));
        assert!(make_two_point(0.5, 1.0, 2.5).is_err());
        assert!(make_two_point(0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn exp_power_tails() {
        let law = make_exp_power(1.0, 1.0).unwrap();
        assert_eq!(law.prob_ge(0.0), 0.5);
        assert!((law.prob_ge(1.0) - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        assert!((law.prob_ge(1.0) - 0.18394).abs() < 1e-5);
        let law = make_exp_power(2.0, 2.0).unwrap();
        assert!((law.prob_ge(2.0) - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        assert!((law.cdf(-2.0) - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        assert!(make_exp_power(2.5, 1.0).is_err());
    }

    #[test]
    fn truncation_cases() {
        let pm = ScalarLaw::point_mass(5.0).unwrap();
        assert_eq!(pm.truncate(10.0).unwrap(), pm);

        let tp = ScalarLaw::two_point(0.3, 2.0).unwrap();
        assert_eq!(tp.truncate(1.0).unwrap(), ScalarLaw::point_mass(0.0).unwrap());

        let ep = make_exp_power(1.0, 1.0).unwrap();
        let tr = ep.truncate(1.0).unwrap();
        assert!((tr.mass_at_zero() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((tr.mass_at_zero() - 0.36788).abs() < 1e-5);
        // Atom at zero: P{X ≥ 0} − P{X > 0}.
        assert!((tr.prob_ge(0.0) - tr.prob_gt(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(tr.prob_ge(1.0 + 1e-12), 0.0);
        assert_eq!(tr.prob_ge(-1.0), 1.0);
        // Nested truncation keeps the smaller level.
        match tr.truncate(3.0).unwrap() {
            ScalarLaw::Truncated { level, .. } => assert_eq!(level, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn finite_truncation_preserves_mass_exactly() {
        let law = ScalarLaw::finite([(-3.0, rat(1, 7)), (0.0, rat(2, 7)), (0.5, rat(3, 7)), (4.0, rat(1, 7))])
            .unwrap();
        let tr = law.truncate(1.0).unwrap();
        match &tr {
            ScalarLaw::FiniteDiscrete(fd) => {
                assert!(fd.total_mass().is_one());
                assert_eq!(fd.atoms().len(), 2);
                assert_eq!(fd.atoms()[0].prob, rat(4, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn finite_rejects_bad_mass() {
        assert!(ScalarLaw::finite([(0.0, rat(1, 2))]).is_err());
        assert!(ScalarLaw::finite([(0.0, rat(3, 2)), (1.0, rat(-1, 2))]).is_err());
        assert!(ScalarLaw::finite([(f64::NAN, rat(1, 1))]).is_err());
    }

    #[test]
    fn lower_medians() {
        assert_eq!(ScalarLaw::rademacher().lower_median(), -1.0);
        assert_eq!(ScalarLaw::two_point(0.5, 1.0).unwrap().lower_median(), 0.0);
        assert_eq!(ScalarLaw::two_point(0.6, 1.0).unwrap().lower_median(), 1.0);
        assert_eq!(make_exp_power(1.5, 2.0).unwrap().lower_median(), 0.0);
        assert_eq!(make_exp_power(1.0, 1.0).unwrap().truncate(0.5).unwrap().lower_median(), 0.0);
    }

    #[test]
    fn sampler_is_deterministic() {
        let law = make_exp_power(1.3, 0.7).unwrap();
        let a = law.sample(10, 42);
        let b = law.sample(10, 42);
        assert_eq!(a, b);
        assert_ne!(a, law.sample(10, 43));
    }

    #[test]
    fn two_point_sample_mean() {
        let law = ScalarLaw::two_point(0.5, 1.0).unwrap();
        let xs = law.sample(1_000_000, 7);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn truncated_quantile_inverts_cdf() {
        let law = make_exp_power(1.5, 1.0).unwrap().truncate(1.2).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let x = law.quantile(u);
            assert!(law.cdf(x) >= u - 1e-12, "u={u} x={x}");
            assert!((-1.2..=1.2).contains(&x));
        }
    }
}
