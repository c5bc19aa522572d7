//! Monte Carlo medians and deviation tails of convex 1-Lipschitz functions
//! under product laws, with exact Clopper–Pearson intervals.

mod audit;
mod experiment;
pub mod suites;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::convex_distance::{dist_to_hull, PointSet};
use crate::extremal::{ExtremalInstance, Side};
use crate::measures::ScalarLaw;
use crate::{Error, Result};

pub use audit::{verify_upper_envelopes, AuditCase, AuditConfig, AuditRow, EnvelopeAudit, FamilyFit};
pub use experiment::{
    run_experiment, run_experiment_file, ExperimentConfig, ExperimentOutcome, Failure, Suite, SuiteOutcome,
};

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `seed` for stream `stream`:
/// `splitmix64(seed ^ splitmix64(stream))`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Samples drawn per RNG chunk; each chunk has its own derived stream, so
/// results do not depend on the thread count.
const CHUNK: usize = 8192;

/// A function of the whole vector, declared convex and 1-Lipschitz.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    EuclideanNorm,
    /// `⟨a, x⟩` with `‖a‖₂ = 1`.
    Linear { a: Vec<f64> },
    MaxCoordinate,
    /// Euclidean distance to the convex hull of a point set.
    DistToConvex { set: PointSet },
}

impl TestFunction {
    /// Linear functional along `a / ‖a‖₂`.
    pub fn linear(a: Vec<f64>) -> Result<Self> {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("a", "linear direction must be a nonzero finite vector"));
        }
        Ok(TestFunction::Linear { a: a.into_iter().map(|v| v / norm).collect() })
    }

    /// `x ↦ x_i`.
    pub fn coordinate(i: usize, dim: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::param("index", format!("{i} is out of range for dimension {dim}")));
        }
        let mut a = vec![0.0; dim];
        a[i] = 1.0;
        Ok(TestFunction::Linear { a })
    }

    /// Dimension the function is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Linear { a } => Some(a.len()),
            TestFunction::DistToConvex { set } => Some(set.dim()),
            _ => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: d, got: dim }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            TestFunction::EuclideanNorm => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            TestFunction::Linear { a } => {
                if a.len() != x.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: x.len() });
                }
                a.iter().zip(x).map(|(ai, xi)| ai * xi).sum()
            }
            TestFunction::MaxCoordinate => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            TestFunction::DistToConvex { set } => dist_to_hull(x, set)?.cert.distance,
        })
    }

    /// Random-pair check of the Lipschitz and midpoint-convexity claims.
    pub fn audit(&self, dim: usize, pairs: usize, seed: u64) -> Result<FunctionAudit> {
        self.check_dim(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_lipschitz = 0.0f64;
        let mut worst_convexity = f64::NEG_INFINITY;
        for i in 0..pairs {
            // Alternate far pairs and close pairs.
            let spread = if i % 2 == 0 { 3.0 } else { 1e-3 };
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = x.iter().map(|&v| v + spread * rng.random_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let (fx, fy, fm) = (self.eval(&x)?, self.eval(&y)?, self.eval(&mid)?);
            let d = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d > 0.0 {
                worst_lipschitz = worst_lipschitz.max((fx - fy).abs() / d);
            }
            let scale = 1.0 + fx.abs().max(fy.abs());
            worst_convexity = worst_convexity.max((fm - 0.5 * (fx + fy)) / scale);
        }
        let tol = match self {
            TestFunction::DistToConvex { .. } => 1e-6,
            _ => 1e-9,
        };
        let audit = FunctionAudit { pairs, worst_lipschitz, worst_convexity };
        if worst_lipschitz > 1.0 + tol || worst_convexity > tol {
            return Err(Error::Hypothesis(format!("{self} fails its audit: {audit:?}")));
        }
        Ok(audit)
    }
}

/// Worst ratios seen by [`TestFunction::audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionAudit {
    pub pairs: usize,
    /// `max |f(x) − f(y)| / ‖x − y‖₂`.
    pub worst_lipschitz: f64,
    /// `max (f(mid) − (f(x) + f(y))/2) / (1 + max |f|)`.
    pub worst_convexity: f64,
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::EuclideanNorm => f.write_str("euclidean_norm"),
            TestFunction::Linear { a } => {
                let nonzero: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
                if nonzero.len() == 1 && a[nonzero[0]] == 1.0 {
                    write!(f, "coordinate:{}", nonzero[0])
                } else if a.windows(2).all(|w| w[0] == w[1]) {
                    f.write_str("linear_uniform")
                } else {
                    f.write_str("linear")
                }
            }
            TestFunction::MaxCoordinate => f.write_str("max_coordinate"),
            TestFunction::DistToConvex { set } => write!(f, "dist_to_convex({} points)", set.len()),
        }
    }
}

/// Dimension-free description of a [`TestFunction`], as written in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    EuclideanNorm,
    /// Explicit direction, or `(1, …, 1)/√n` when omitted.
    Linear {
        #[serde(default)]
        a: Option<Vec<f64>>,
    },
    Coordinate { index: usize },
    MaxCoordinate,
    DistToConvex { points: Vec<Vec<f64>> },
}

impl FunctionSpec {
    pub fn build(&self, dim: usize) -> Result<TestFunction> {
        let f = match self {
            FunctionSpec::EuclideanNorm => TestFunction::EuclideanNorm,
            FunctionSpec::Linear { a: Some(a) } => TestFunction::linear(a.clone())?,
            FunctionSpec::Linear { a: None } => TestFunction::linear(vec![1.0; dim])?,
            FunctionSpec::Coordinate { index } => TestFunction::coordinate(*index, dim)?,
            FunctionSpec::MaxCoordinate => TestFunction::MaxCoordinate,
            FunctionSpec::DistToConvex { points } => TestFunction::DistToConvex { set: PointSet::new(points.clone())? },
        };
        f.check_dim(dim)?;
        Ok(f)
    }
}

/// Compact syntax: `euclidean_norm`, `max_coordinate`, `linear`,
/// `linear:a1,a2,…`, `coordinate:i`.
impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h.trim(), Some(r.trim())),
            None => (s, None),
        };
        match (head, rest) {
            ("euclidean_norm" | "norm", None) => Ok(FunctionSpec::EuclideanNorm),
            ("max_coordinate" | "max", None) => Ok(FunctionSpec::MaxCoordinate),
            ("linear", None) => Ok(FunctionSpec::Linear { a: None }),
            ("linear", Some(r)) => Ok(FunctionSpec::Linear { a: Some(crate::convex_distance::parse_point(r)?) }),
            ("coordinate", Some(r)) => r
                .parse()
                .map(|index| FunctionSpec::Coordinate { index })
                .map_err(|_| Error::Config(format!("bad coordinate index `{r}`"))),
            _ => Err(Error::Config(format!("unknown function `{s}`"))),
        }
    }
}

/// Independent, possibly non-identical, coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLaw {
    components: Vec<ScalarLaw>,
}

impl ProductLaw {
    pub fn new(components: Vec<ScalarLaw>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::param("components", "need at least one coordinate"));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    pub fn iid(law: ScalarLaw, n: usize) -> Result<Self> {
        Self::new(vec![law; n])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarLaw] {
        &self.components
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        for (xi, law) in x.iter_mut().zip(&self.components) {
            *xi = law.draw(rng);
        }
    }

    /// Largest `ψ_p` norm among the coordinates.
    pub fn psi_p_norm(&self, p: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for (i, c) in self.components.iter().enumerate() {
            if self.components[..i].contains(c) {
                continue;
            }
            best = best.max(c.psi_p_norm(p)?.norm);
        }
        Ok(best)
    }

    fn iid_two_point(&self) -> Option<(f64, f64)> {
        match &self.components[0] {
            ScalarLaw::TwoPoint { theta, alpha } if self.components.iter().all(|c| *c == self.components[0]) => {
                Some((*theta, *alpha))
            }
            _ => None,
        }
    }

    fn point_mass(&self) -> Option<Vec<f64>> {
        self.components
            .iter()
            .map(|c| match c.finite_support() {
                Some(s) if s.len() == 1 => Some(s[0].0),
                _ => None,
            })
            .collect()
    }
}

/// How a median or tail was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Mc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Median {
    pub value: f64,
    pub method: Method,
}

/// Smallest number of samples accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

/// Lower median of `f(X)` when it is available in closed form: point masses,
/// a coordinate of a finite law, or the norm of i.i.d. two-point coordinates.
pub fn exact_median(f: &TestFunction, law: &ProductLaw) -> Result<Option<f64>> {
    f.check_dim(law.dim())?;
    if let Some(x) = law.point_mass() {
        return f.eval(&x).map(Some);
    }
    match f {
        TestFunction::EuclideanNorm => match law.iid_two_point() {
            Some((theta, alpha)) => {
                let inst = ExtremalInstance::with_alpha(law.dim() as u64, theta, alpha)?;
                Ok(Some(inst.median_norm))
            }
            None => Ok(None),
        },
        TestFunction::Linear { a } => {
            let nonzero: Vec<usize> = (0..a.len()).filter(|&i| a[i] != 0.0).collect();
            match nonzero.as_slice() {
                [i] if a[*i] == 1.0 && law.components[*i].finite_support().is_some() => {
                    Ok(Some(law.components[*i].lower_median()))
                }
                _ => Ok(None),
            }
        }
        _ => Ok(None),
    }
}

/// Values of several functions on the same `samples` draws of `law`.
pub fn sample_values(fs: &[TestFunction], law: &ProductLaw, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    for f in fs {
        f.check_dim(law.dim())?;
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut x = vec![0.0; law.dim()];
            let mut out: Vec<Vec<f64>> = fs.iter().map(|_| Vec::with_capacity(len)).collect();
            for _ in 0..len {
                law.fill(&mut rng, &mut x);
                for (f, o) in fs.iter().zip(out.iter_mut()) {
                    o.push(f.eval(&x)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values: Vec<Vec<f64>> = fs.iter().map(|_| Vec::with_capacity(samples)).collect();
    for part in parts {
        for (v, p) in values.iter_mut().zip(part) {
            v.extend(p);
        }
    }
    Ok(values)
}

/// Order statistic at `⌈m/2⌉` (1-based) of unsorted values.
pub fn empirical_lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let idx = v.len().div_ceil(2) - 1;
    let (_, m, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
    *m
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::param("samples", format!("{samples} is below {MIN_SAMPLES}")));
    }
    Ok(())
}

/// Median of `f(X)`: exact when [`exact_median`] applies, otherwise the
/// empirical lower median of `samples` draws.
pub fn estimate_median(f: &TestFunction, law: &ProductLaw, samples: usize, seed: u64) -> Result<Median> {
    check_samples(samples)?;
    if let Some(value) = exact_median(f, law)? {
        return Ok(Median { value, method: Method::Exact });
    }
    let values = sample_values(std::slice::from_ref(f), law, samples, seed)?;
    Ok(Median { value: empirical_lower_median(&values[0]), method: Method::Mc })
}

/// Exact Clopper–Pearson interval for `hits` successes out of `trials` at
/// two-sided confidence `level`, from the crate's binomial tails.
pub fn clopper_pearson(hits: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || hits > trials {
        return Err(Error::param("hits", format!("{hits} successes out of {trials} trials")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", format!("{level} outside (0, 1)")));
    }
    let ln_half_alpha = ((1.0 - level) / 2.0).ln();
    let nf = trials as f64;
    let lo = if hits == 0 {
        0.0
    } else if hits == trials {
        (ln_half_alpha / nf).exp()
    } else {
        // P{Bin(n, q) ≥ hits} = α/2, increasing in q.
        solve_q(|q| binomial::ln_tail(trials, q, hits) - ln_half_alpha, true)
    };
    let hi = if hits == trials {
        1.0
    } else if hits == 0 {
        -(ln_half_alpha / nf).exp_m1()
    } else {
        // P{Bin(n, q) ≤ hits} = α/2, decreasing in q.
        solve_q(|q| binomial::ln_cdf(trials, q, hits) - ln_half_alpha, false)
    };
    Ok((lo, hi))
}

/// Root in `(0, 1)` of a monotone function, by bisection on the log-odds.
fn solve_q(g: impl Fn(f64) -> f64, increasing: bool) -> f64 {
    let (mut a, mut b) = (-60.0f64, 60.0f64);
    let q = |z: f64| 1.0 / (1.0 + (-z).exp());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let above = g(q(mid)) > 0.0;
        if above == increasing {
            b = mid;
        } else {
            a = mid;
        }
    }
    q(0.5 * (a + b))
}

/// A deviation probability with its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
    pub samples: u64,
    pub hits: u64,
    pub seed: u64,
    pub median: f64,
    pub median_method: Method,
}

/// Confidence level of every Monte Carlo interval.
pub const CI_LEVEL: f64 = 0.99;

/// Slack of the event `f − Med ≥ t` against rounding in `f`.
fn event_slack(median: f64, t: f64) -> f64 {
    1e-12 * (1.0 + median.abs() + t.abs())
}

/// Number of values with `v − median ≥ t` (upper) or `v − median ≤ −t` (lower).
pub fn count_deviations(values: &[f64], median: f64, t: f64, side: Side) -> u64 {
    let eps = event_slack(median, t);
    match side {
        Side::Upper => values.iter().filter(|&&v| v >= median + t - eps).count() as u64,
        Side::Lower => values.iter().filter(|&&v| v <= median - t + eps).count() as u64,
    }
}

/// Same as [`count_deviations`] on ascending values.
pub fn count_deviations_sorted(sorted: &[f64], median: f64, t: f64, side: Side) -> u64 {
    let eps = event_slack(median, t);
    match side {
        Side::Upper => {
            let cut = median + t - eps;
            (sorted.len() - sorted.partition_point(|&v| v < cut)) as u64
        }
        Side::Lower => {
            let cut = median - t + eps;
            sorted.partition_point(|&v| v <= cut) as u64
        }
    }
}

/// Monte Carlo `P{f(X) − Med ≥ t}` (or `≤ −t`) with a 99% Clopper–Pearson
/// interval. The median uses stream 0 of `seed`, the indicator stream 1.
pub fn estimate_tail(
    f: &TestFunction,
    law: &ProductLaw,
    t: f64,
    side: Side,
    samples: usize,
    seed: u64,
) -> Result<TailEstimate> {
    check_samples(samples)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("{t} must be positive")));
    }
    let median = estimate_median(f, law, samples, derive_seed(seed, 0))?;
    let values = sample_values(std::slice::from_ref(f), law, samples, derive_seed(seed, 1))?;
    let hits = count_deviations(&values[0], median.value, t, side);
    let (ci_low, ci_high) = clopper_pearson(hits, samples as u64, CI_LEVEL)?;
    Ok(TailEstimate {
        estimate: hits as f64 / samples as f64,
        ci_low,
        ci_high,
        method: Method::Mc,
        samples: samples as u64,
        hits,
        seed,
        median: median.value,
        median_method: median.method,
    })
}

/// Exact tail for the norm of i.i.d. two-point coordinates.
pub fn exact_tail(f: &TestFunction, law: &ProductLaw, t: f64, side: Side) -> Result<Option<TailEstimate>> {
    let (TestFunction::EuclideanNorm, Some((theta, alpha))) = (f, law.iid_two_point()) else {
        return Ok(None);
    };
    let inst = ExtremalInstance::with_alpha(law.dim() as u64, theta, alpha)?;
    let p = inst.norm_tail_exact(t, side);
    Ok(Some(TailEstimate {
        estimate: p,
        ci_low: p,
        ci_high: p,
        method: Method::Exact,
        samples: 0,
        hits: 0,
        seed: 0,
        median: inst.median_norm,
        median_method: Method::Exact,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rademacher(n: usize) -> ProductLaw {
        ProductLaw::iid(ScalarLaw::rademacher(), n).unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
    }

    #[test]
    fn median_examples() {
        let e1 = TestFunction::coordinate(0, 3).unwrap();
        assert_eq!(estimate_median(&e1, &rademacher(3), 1000, 1).unwrap().value, -1.0);
        let zero = ProductLaw::iid(ScalarLaw::point_mass(0.0).unwrap(), 5).unwrap();
        assert_eq!(estimate_median(&TestFunction::EuclideanNorm, &zero, 1000, 1).unwrap().value, 0.0);
        let tp = ProductLaw::iid(ScalarLaw::two_point(0.5, 1.0).unwrap(), 4).unwrap();
        let m = estimate_median(&TestFunction::EuclideanNorm, &tp, 1000, 1).unwrap();
        assert_eq!(m.method, Method::Exact);
        assert!((m.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(estimate_median(&e1, &rademacher(3), 999, 1).is_err());
    }

    #[test]
    fn empirical_median_convention() {
        assert_eq!(empirical_lower_median(&[3.0, 1.0, 2.0, 4.0]), 2.0);
        assert_eq!(empirical_lower_median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn tail_examples() {
        let e1 = TestFunction::coordinate(0, 2).unwrap();
        let est = estimate_tail(&e1, &rademacher(2), 2.0, Side::Upper, 20_000, 5).unwrap();
        assert!(est.ci_low <= 0.5 && 0.5 <= est.ci_high, "{est:?}");
        let far = estimate_tail(&e1, &rademacher(2), 3.0, Side::Upper, 20_000, 5).unwrap();
        assert_eq!((far.estimate, far.ci_low), (0.0, 0.0));

        let tp = ProductLaw::iid(ScalarLaw::two_point(0.5, 1.0).unwrap(), 4).unwrap();
        let t = 3f64.sqrt() - 2f64.sqrt();
        let est = estimate_tail(&TestFunction::EuclideanNorm, &tp, t, Side::Upper, 20_000, 9).unwrap();
        assert!(est.ci_low <= 0.3125 && 0.3125 <= est.ci_high, "{est:?}");
        let exact = exact_tail(&TestFunction::EuclideanNorm, &tp, t, Side::Upper).unwrap().unwrap();
        assert_eq!((exact.ci_low, exact.ci_high), (exact.estimate, exact.estimate));
        assert!((exact.estimate - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 100, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(0.01))).abs() < 1e-15);
        let (lo, hi) = clopper_pearson(100, 100, 0.99).unwrap();
        assert!((lo - 0.005f64.powf(0.01)).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        // Textbook 95% interval for 3 of 10.
        let (lo, hi) = clopper_pearson(3, 10, 0.95).unwrap();
        assert!((lo - 0.0667).abs() < 1e-4 && (hi - 0.6525).abs() < 1e-4, "{lo} {hi}");
    }

    #[test]
    fn function_audits() {
        let set = PointSet::new(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        for f in [
            TestFunction::EuclideanNorm,
            TestFunction::MaxCoordinate,
            TestFunction::linear(vec![1.0, -2.0, 0.5]).unwrap(),
            TestFunction::DistToConvex { set },
        ] {
            f.audit(3, 1000, 3).unwrap();
        }
        assert!(TestFunction::linear(vec![0.0, 0.0]).is_err());
        assert!(TestFunction::linear(vec![1.0, 0.0]).unwrap().audit(3, 10, 1).is_err());
    }

    #[test]
    fn function_syntax() {
        assert_eq!("norm".parse::<FunctionSpec>().unwrap(), FunctionSpec::EuclideanNorm);
        assert_eq!("coordinate:2".parse::<FunctionSpec>().unwrap(), FunctionSpec::Coordinate { index: 2 });
        let f = "linear:3,4".parse::<FunctionSpec>().unwrap().build(2).unwrap();
        assert_eq!(f, TestFunction::Linear { a: vec![0.6, 0.8] });
        assert!("linear:1,2".parse::<FunctionSpec>().unwrap().build(3).is_err());
        assert!("cube".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = rademacher(5);
        let fs = [TestFunction::EuclideanNorm, TestFunction::MaxCoordinate];
        let a = sample_values(&fs, &law, 20_000, 3).unwrap();
        let b = sample_values(&fs, &law, 20_000, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 20_000);
        let sorted = {
            let mut v = a[1].clone();
            v.sort_by(f64::total_cmp);
            v
        };
        for t in [0.5, 1.0, 2.0] {
            for side in [Side::Upper, Side::Lower] {
                assert_eq!(count_deviations(&a[1], 0.0, t, side), count_deviations_sorted(&sorted, 0.0, t, side));
            }
        }
    }
}
