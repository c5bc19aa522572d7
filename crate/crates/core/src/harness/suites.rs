//! Formula-versus-oracle suites. Each returns CSV rows and failure records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Failure};
use crate::binomial::{self, exact, ExactTheta, FitOptions};
use crate::convex_distance::{dist_c, dist_to_hull, PointSet};
use crate::extremal::{self, SweepConfig, SweepRow};
use crate::measures::{make_two_point, ratio_to_f64, ScalarLaw};
use crate::talagrand::{choice_of_l, exp_moment_from_counts, h_cost, min_basic, remark_bound};
use crate::{Error, Result};

/// Rows and failures of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult<R> {
    pub rows: Vec<R>,
    pub failures: Vec<Failure>,
}

fn failure(suite: &str, case: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Failure {
    Failure { suite: suite.into(), case: case.into(), expected: expected.into(), got: got.into() }
}

// ---------------------------------------------------------------- binomial

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinomialSuite {
    pub max_n: u64,
    pub thetas: Vec<f64>,
    pub rel_tol: f64,
    /// Medians are checked against `⌊θn⌋, ⌈θn⌉` for `n` up to this value.
    pub median_max_n: u64,
}

impl Default for BinomialSuite {
    fn default() -> Self {
        Self { max_n: 30, thetas: (1..=9).map(|i| i as f64 / 10.0).collect(), rel_tol: 1e-12, median_max_n: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialRow {
    pub n: u64,
    pub theta: f64,
    pub k: u64,
    pub tail_logspace: f64,
    pub tail_exact: f64,
    pub rel_err: f64,
    pub seed: u64,
}

/// Log-space tails against rational enumeration, plus the median sandwich.
pub fn binomial_suite(cfg: &BinomialSuite, seed: u64) -> Result<SuiteResult<BinomialRow>> {
    const SUITE: &str = "binomial";
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for n in 1..=cfg.max_n {
        for &theta in &cfg.thetas {
            let th = ExactTheta::from_f64(theta)?;
            for k in 0..=n {
                let tail_exact = ratio_to_f64(&exact::tail_exact(n, &th, k));
                let tail_logspace = binomial::ln_tail(n, theta, k).exp();
                let rel_err = ((tail_logspace - tail_exact) / tail_exact).abs();
                if !(rel_err <= cfg.rel_tol) {
                    failures.push(failure(
                        SUITE,
                        format!("tail n={n} theta={theta} k={k}"),
                        format!("relative error <= {}", cfg.rel_tol),
                        format!("{rel_err:e}"),
                    ));
                }
                rows.push(BinomialRow { n, theta, k, tail_logspace, tail_exact, rel_err, seed });
            }
        }
    }
    for n in 1..=cfg.median_max_n {
        for i in 1..=99 {
            let theta = i as f64 / 100.0;
            let m = binomial::binom_median(n, theta)? as f64;
            let mean = n as f64 * theta;
            if m < mean.floor() || m > mean.ceil() {
                failures.push(failure(
                    SUITE,
                    format!("median n={n} theta={theta}"),
                    format!("in [{}, {}]", mean.floor(), mean.ceil()),
                    m.to_string(),
                ));
            }
        }
    }
    Ok(SuiteResult { rows, failures })
}

// ---------------------------------------------------------------- minbasic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinBasicSuite {
    pub instances: usize,
    pub tol: f64,
}

impl Default for MinBasicSuite {
    fn default() -> Self {
        Self { instances: 1000, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinBasicKind {
    MinBasic,
    HCost,
    /// `closed_form` is the remark bound, `numeric` the minimized `H`.
    Remark,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinBasicRow {
    pub case: usize,
    pub kind: MinBasicKind,
    pub a: f64,
    pub b: f64,
    pub scale: f64,
    pub closed_form: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub seed: u64,
}

/// Minimum of `φ` on `[0, 1]`: a 2001-point grid refined by golden-section
/// search around the best grid point.
pub fn grid_golden_min(phi: impl Fn(f64) -> f64) -> f64 {
    const M: usize = 2000;
    let (best_i, best_v) = (0..=M)
        .map(|i| (i, phi(i as f64 / M as f64)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let (mut a, mut b) = (best_i.saturating_sub(1) as f64 / M as f64, ((best_i + 1).min(M)) as f64 / M as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = phi(x2);
        }
    }
    best_v.min(f1).min(f2).min(phi(a)).min(phi(b))
}

/// `min_basic` and `H` against numerical minimization, and the remark bound
/// against `H`, on random instances.
pub fn minbasic_suite(cfg: &MinBasicSuite, seed: u64) -> Result<SuiteResult<MinBasicRow>> {
    const SUITE: &str = "minbasic";
    let per_case = (0..cfg.instances)
        .into_par_iter()
        .map(|case| {
            let s = derive_seed(seed, case as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut rows = Vec::with_capacity(3);

            let a = rng.random_range(-5.0..5.0);
            let b = a - rng.random_range(0.0..6.0);
            let c0r2 = (rng.random_range(-3.0f64..1.6)).exp();
            let closed = min_basic(a, b, c0r2)?.value;
            let numeric = grid_golden_min(|l| -l * b - (1.0 - l) * a + c0r2 * (1.0 - l).powi(2));
            rows.push(MinBasicRow {
                case,
                kind: MinBasicKind::MinBasic,
                a,
                b,
                scale: c0r2,
                closed_form: closed,
                numeric,
                abs_err: (closed - numeric).abs(),
                seed: s,
            });

            let h_t = rng.random_range(-3.0..3.0);
            let h_y = rng.random_range(-3.0..3.0);
            let kappa = rng.random_range(0.1..3.0);
            let dt: f64 = rng.random_range(-2.0..2.0);
            let q = kappa * dt * dt;
            let closed = h_cost(h_t, h_y, kappa, dt)?;
            let numeric = grid_golden_min(|l| -l * h_y - (1.0 - l) * h_t + q * l * l);
            rows.push(MinBasicRow {
                case,
                kind: MinBasicKind::HCost,
                a: h_t,
                b: h_y,
                scale: q,
                closed_form: closed,
                numeric,
                abs_err: (closed - numeric).abs(),
                seed: s,
            });

            let (lo, hi) = if h_t <= h_y { (h_t, h_y) } else { (h_y, h_t) };
            let big_q = 4.0 * q * rng.random_range(1.0..3.0) + 1e-3;
            let bound = remark_bound(lo, hi, kappa, dt, big_q)?;
            let h = h_cost(lo, hi, kappa, dt)?;
            rows.push(MinBasicRow {
                case,
                kind: MinBasicKind::Remark,
                a: lo,
                b: hi,
                scale: big_q,
                closed_form: bound,
                numeric: h,
                abs_err: (bound - h).abs(),
                seed: s,
            });
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<MinBasicRow> = per_case.into_iter().flatten().collect();
    let failures = rows
        .iter()
        .filter_map(|r| {
            let bad = match r.kind {
                MinBasicKind::Remark => r.closed_form < r.numeric - cfg.tol,
                _ => !(r.abs_err <= cfg.tol),
            };
            bad.then(|| {
                let expected = match r.kind {
                    MinBasicKind::Remark => format!("remark bound >= H = {}", r.numeric),
                    _ => format!("{} within {}", r.numeric, cfg.tol),
                };
                failure(SUITE, format!("{:?} case {}", r.kind, r.case), expected, r.closed_form.to_string())
            })
        })
        .collect();
    Ok(SuiteResult { rows, failures })
}

// ---------------------------------------------------------------- distance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceSuite {
    pub instances: usize,
    pub max_vertices: usize,
    pub max_dim: usize,
    /// Nested sample sizes; the vertices always come first.
    pub sample_sizes: Vec<usize>,
    /// Allowed excess over the hull distance, relative to `1 + distance`.
    pub excess_tol: f64,
    pub gap_tol: f64,
}

impl Default for DistanceSuite {
    fn default() -> Self {
        Self {
            instances: 500,
            max_vertices: 10,
            max_dim: 6,
            sample_sizes: vec![25, 50, 100, 200],
            excess_tol: 5e-2,
            gap_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub case: usize,
    pub dim: usize,
    pub vertices: usize,
    pub sample_size: usize,
    pub dist_c: f64,
    pub dist_hull: f64,
    pub excess: f64,
    pub gap: f64,
    pub hull_gap: f64,
    pub seed: u64,
}

/// Points of the hull of `vertices`: the vertices themselves, then random
/// convex combinations of two or three of them.
pub fn hull_sample(vertices: &[Vec<f64>], size: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let dim = vertices[0].len();
    let mut out: Vec<Vec<f64>> = vertices.iter().take(size).cloned().collect();
    while out.len() < size {
        let k = rng.random_range(2..=3.min(vertices.len()).max(2));
        let mut w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let mut p = vec![0.0; dim];
        for wi in &w {
            let v = &vertices[rng.random_range(0..vertices.len())];
            for (pj, vj) in p.iter_mut().zip(v) {
                *pj += wi * vj;
            }
        }
        out.push(p);
    }
    out
}

/// `dist^c` to growing hull samples versus the distance to the hull.
pub fn distance_suite(cfg: &DistanceSuite, seed: u64) -> Result<SuiteResult<DistanceRow>> {
    const SUITE: &str = "distance";
    if cfg.max_vertices < 2 || cfg.max_dim < 1 {
        return Err(Error::param("distance", "need at least 2 vertices and dimension 1"));
    }
    let per_case = (0..cfg.instances)
        .into_par_iter()
        .map(|case| {
            let s = derive_seed(seed, case as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let dim = rng.random_range(1..=cfg.max_dim);
            let m = rng.random_range(2..=cfg.max_vertices);
            let vertices: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let hull = PointSet::new(vertices.clone())?;
            let (x, hull_dist) = loop {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect();
                let hd = dist_to_hull(&x, &hull)?;
                if hd.cert.distance > 1e-3 {
                    break (x, hd);
                }
            };
            let max_size = cfg.sample_sizes.iter().copied().max().unwrap_or(m).max(m);
            let sample = hull_sample(&vertices, max_size, &mut rng);
            let mut sizes: Vec<usize> = std::iter::once(m).chain(cfg.sample_sizes.iter().copied()).filter(|&k| k >= m).collect();
            sizes.sort_unstable();
            sizes.dedup();
            let mut rows = Vec::new();
            for size in sizes {
                let a = PointSet::new(sample[..size].to_vec())?;
                let cert = dist_c(&x, &a)?;
                rows.push(DistanceRow {
                    case,
                    dim,
                    vertices: m,
                    sample_size: size,
                    dist_c: cert.distance,
                    dist_hull: hull_dist.cert.distance,
                    excess: cert.distance - hull_dist.cert.distance,
                    gap: cert.gap,
                    hull_gap: hull_dist.cert.gap,
                    seed: s,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let final_size = cfg.sample_sizes.iter().copied().max();
    for rows in &per_case {
        for (i, r) in rows.iter().enumerate() {
            let scale = 1.0 + r.dist_hull;
            let label = format!("case {} size {}", r.case, r.sample_size);
            if r.gap > cfg.gap_tol || r.hull_gap > cfg.gap_tol {
                failures.push(failure(SUITE, &label, format!("gaps <= {}", cfg.gap_tol), format!("{} / {}", r.gap, r.hull_gap)));
            }
            if r.excess < -1e-9 * scale {
                failures.push(failure(SUITE, &label, "dist_c >= hull distance", format!("excess {}", r.excess)));
            }
            if i > 0 && r.dist_c > rows[i - 1].dist_c + 1e-9 * scale {
                failures.push(failure(
                    SUITE,
                    &label,
                    format!("nonincreasing (previous {})", rows[i - 1].dist_c),
                    r.dist_c.to_string(),
                ));
            }
            if Some(r.sample_size) == final_size && r.excess > cfg.excess_tol * scale {
                failures.push(failure(
                    SUITE,
                    &label,
                    format!("excess <= {}", cfg.excess_tol * scale),
                    r.excess.to_string(),
                ));
            }
        }
    }
    Ok(SuiteResult { rows: per_case.into_iter().flatten().collect(), failures })
}

// ---------------------------------------------------------------- expmoment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpMomentSuite {
    pub ns: Vec<usize>,
    pub laws: Vec<ScalarLaw>,
    pub deltas: Vec<f64>,
    /// Random sets `A` per `(n, law, δ)`.
    pub sets: usize,
    pub min_mass: f64,
    pub samples: usize,
}

impl Default for ExpMomentSuite {
    fn default() -> Self {
        Self {
            ns: (2..=6).collect(),
            laws: vec![ScalarLaw::rademacher(), ScalarLaw::two_point(0.2, 1.0).expect("valid law")],
            deltas: vec![0.5, 0.1],
            sets: 1,
            min_mass: 0.05,
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMomentRow {
    pub n: usize,
    pub law: String,
    pub delta: f64,
    pub set_size: usize,
    pub prob_a: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub mean: f64,
    pub half_width: f64,
    pub upper: f64,
    pub exact_mean: f64,
    pub bound: f64,
    pub samples: u64,
    pub seed: u64,
}

/// All atoms of the product of `n` copies of a finite law.
fn product_atoms(support: &[(f64, f64)], n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut atoms = vec![(Vec::with_capacity(n), 1.0)];
    for _ in 0..n {
        atoms = atoms
            .into_iter()
            .flat_map(|(x, p)| {
                support.iter().map(move |&(v, q)| {
                    let mut y = x.clone();
                    y.push(v);
                    (y, p * q)
                })
            })
            .collect();
    }
    atoms
}

/// `E exp(dist^c(X, A)²/L²)` by Monte Carlo over a finite product law, with
/// `L² = 512K² log(2 + n/log(2 + 1/δ))`, against `4/(P{X ∈ A}·δ)`.
pub fn expmoment_suite(cfg: &ExpMomentSuite, seed: u64) -> Result<SuiteResult<ExpMomentRow>> {
    const SUITE: &str = "expmoment";
    let mut jobs = Vec::new();
    for &n in &cfg.ns {
        for law in &cfg.laws {
            for &delta in &cfg.deltas {
                for set in 0..cfg.sets {
                    jobs.push((n, law.clone(), delta, set));
                }
            }
        }
    }
    let rows = jobs
        .iter()
        .enumerate()
        .map(|(j, (n, law, delta, _))| {
            let s = derive_seed(seed, j as u64);
            expmoment_case(*n, law, *delta, cfg.min_mass, cfg.samples, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut failures = Vec::new();
    for r in &rows {
        let label = format!("n={} law={} delta={} |A|={}", r.n, r.law, r.delta, r.set_size);
        if !(r.upper <= r.bound) {
            failures.push(failure(SUITE, &label, format!("upper <= {}", r.bound), r.upper.to_string()));
        }
        if (r.mean - r.exact_mean).abs() > 5.0 * r.half_width + 1e-12 {
            failures.push(failure(
                SUITE,
                &label,
                format!("exact mean {} within 5 half-widths", r.exact_mean),
                r.mean.to_string(),
            ));
        }
    }
    Ok(SuiteResult { rows, failures })
}

fn expmoment_case(n: usize, law: &ScalarLaw, delta: f64, min_mass: f64, samples: usize, seed: u64) -> Result<ExpMomentRow> {
    let support = law
        .finite_support()
        .ok_or_else(|| Error::param("law", "the exponential-moment suite needs a finite law"))?;
    let atoms = product_atoms(&support, n);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let total = atoms.len();
    let (members, prob_a) = loop {
        let size = rng.random_range(1..=total.div_ceil(2).max(1));
        let mut idx: Vec<usize> = (0..total).collect();
        for i in 0..size {
            let j = rng.random_range(i..total);
            idx.swap(i, j);
        }
        let mut chosen = idx[..size].to_vec();
        chosen.sort_unstable();
        let mass: f64 = chosen.iter().map(|&i| atoms[i].1).sum();
        if mass >= min_mass {
            break (chosen, mass);
        }
    };
    let a = PointSet::new(members.iter().map(|&i| atoms[i].0.clone()).collect())?;
    let k = law.psi_p_norm(2.0)?.norm;
    let l = choice_of_l(n as u64, delta, k)?;
    let dists = atoms.iter().map(|(x, _)| dist_c(x, &a).map(|c| c.distance)).collect::<Result<Vec<f64>>>()?;
    let exact_mean: f64 = atoms.iter().zip(&dists).map(|((_, p), d)| p * (d / l).powi(2).exp()).sum();

    // Atom index in mixed radix over the support.
    let chunk = 1 << 16;
    let chunks = samples.div_ceil(chunk);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk.min(samples - c * chunk);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, 1), c as u64));
            let mut counts = vec![0u64; total];
            for _ in 0..len {
                let mut index = 0;
                for _ in 0..n {
                    let v = law.draw(&mut rng);
                    let pos = support.iter().position(|&(s, _)| s == v).expect("draw lies in the support");
                    index = index * support.len() + pos;
                }
                counts[index] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; total],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                acc
            },
        );
    let pairs: Vec<(f64, u64)> = dists.iter().copied().zip(counts).collect();
    let est = exp_moment_from_counts(&pairs, l)?;
    Ok(ExpMomentRow {
        n,
        law: law.to_string(),
        delta,
        set_size: members.len(),
        prob_a,
        k,
        l,
        mean: est.mean,
        half_width: est.half_width,
        upper: est.upper(),
        exact_mean,
        bound: 4.0 / (prob_a * delta),
        samples: est.samples,
        seed,
    })
}

// ---------------------------------------------------------------- extremal

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtremalSuite {
    pub ns: Vec<u64>,
    pub k: f64,
    pub p: f64,
    pub c_b: f64,
    pub steps: usize,
    pub max_constant: f64,
    /// Allowed ratio between the largest and smallest fitted constants.
    pub stability: f64,
}

impl Default for ExtremalSuite {
    fn default() -> Self {
        Self { ns: vec![1_000, 10_000, 100_000], k: 1.0, p: 2.0, c_b: 0.1, steps: 32, max_constant: 50.0, stability: 2.0 }
    }
}

/// Exact optimality sweeps with their structural checks.
pub fn extremal_suite(cfg: &ExtremalSuite, seed: u64) -> Result<SuiteResult<SweepRow>> {
    const SUITE: &str = "extremal";
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut constants = Vec::new();
    for (i, &n) in cfg.ns.iter().enumerate() {
        let sweep = SweepConfig { steps: cfg.steps, seed: derive_seed(seed, i as u64), ..SweepConfig::new(n, cfg.k, cfg.p, cfg.c_b) };
        let rep = extremal::optimality_sweep(&sweep, &FitOptions::default())?;
        constants.push(rep.fitted_big_c);
        if !(rep.fitted_big_c <= cfg.max_constant) {
            failures.push(failure(SUITE, format!("n={n}"), format!("C <= {}", cfg.max_constant), rep.fitted_big_c.to_string()));
        }
        for r in &rep.rows {
            let label = format!("n={n} t={}", r.t);
            if r.ln_envelope_upper > r.ln_tail_upper_exact || r.ln_envelope_lower > r.ln_tail_lower_exact {
                failures.push(failure(SUITE, &label, "envelopes below exact tails", "envelope above tail"));
            }
            if r.branch == extremal::Branch::Window && r.median_norm < r.t {
                failures.push(failure(SUITE, &label, format!("median >= {}", r.t), r.median_norm.to_string()));
            }
            let norm = make_two_point(r.theta, cfg.k, cfg.p)?.psi_p_norm(cfg.p)?.norm;
            if norm > cfg.k * (1.0 + 1e-9) {
                failures.push(failure(SUITE, &label, format!("psi_p norm <= {}", cfg.k), norm.to_string()));
            }
        }
        rows.extend(rep.rows);
    }
    if let (Some(lo), Some(hi)) = (
        constants.iter().copied().reduce(f64::min),
        constants.iter().copied().reduce(f64::max),
    ) {
        if hi > cfg.stability * lo {
            failures.push(failure(SUITE, "stability", format!("max/min <= {}", cfg.stability), (hi / lo).to_string()));
        }
    }
    Ok(SuiteResult { rows, failures })
}
