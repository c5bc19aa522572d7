//! Extremal two-point constructions with exactly computed norm tails.
//!
//! For `X_i = α·Y_i` with `Y_i ~ Bernoulli(θ)`, `‖X‖₂ = α·√(ΣY_i)`, so every
//! deviation probability of the norm is a binomial tail.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial::{self, fit_constant, threshold_ceil, ConstantFit, FitOptions};
use crate::measures::{make_two_point, ScalarLaw};
use crate::numeric::geomspace;
use crate::{Error, Result};

/// `(x·(log x)^{2/p})^{−1}` with `x = K²n/(3t²)`; needs `x > 1`.
pub fn theta_formula(n: f64, t: f64, k: f64, p: f64) -> Result<f64> {
    let x = k * k * n / (3.0 * t * t);
    if !(x > 1.0) || !x.is_finite() {
        return Err(Error::param("t", format!("K²n/(3t²) = {x} must exceed 1")));
    }
    Ok(1.0 / (x * x.ln().powf(2.0 / p)))
}

/// The admissible `t` range `[√(K²(log n)^{2/p}/(3c_b)), √(c_b K² n/3)]`.
pub fn case_one_window(n: u64, k: f64, p: f64, c_b: f64) -> (f64, f64) {
    let nf = n as f64;
    let lo = (k * k * nf.ln().powf(2.0 / p) / (3.0 * c_b)).sqrt();
    let hi = (c_b * k * k * nf / 3.0).sqrt();
    (lo, hi)
}

/// Which branch of the construction produced `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `t` inside the window, `θ = θ(t)`.
    Window,
    /// `t` below the window, `θ = θ(t₀)` at the window's left end.
    BelowWindow,
}

/// `θ(t)` on the window and `θ(t₀)` below it; above the window the coordinate
/// example applies instead and an error is returned.
pub fn theta_of_t(n: u64, t: f64, k: f64, p: f64, c_b: f64) -> Result<(f64, Branch)> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("{t} must be nonnegative")));
    }
    let (lo, hi) = case_one_window(n, k, p, c_b);
    if lo > hi {
        return Err(Error::Hypothesis(format!(
            "empty window [{lo}, {hi}] for n = {n}, c_b = {c_b}; increase n or c_b"
        )));
    }
    if t > hi * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "t = {t} is above the window end {hi}; use the coordinate example"
        )));
    }
    if t < lo {
        Ok((theta_formula(n as f64, lo, k, p)?, Branch::BelowWindow))
    } else {
        Ok((theta_formula(n as f64, t.min(hi), k, p)?, Branch::Window))
    }
}

/// `½·exp(−(t/K̃)^p)`, the tail of one symmetric exponential-power coordinate.
pub fn coordinate_tail(t: f64, k_tilde: f64, p: f64) -> Result<f64> {
    ln_coordinate_tail(t, k_tilde, p).map(f64::exp)
}

pub fn ln_coordinate_tail(t: f64, k_tilde: f64, p: f64) -> Result<f64> {
    if !(t >= 0.0) || !(k_tilde > 0.0) || !(1.0..=2.0).contains(&p) {
        return Err(Error::param("coordinate tail", format!("t = {t}, K̃ = {k_tilde}, p = {p}")));
    }
    Ok(-(2f64.ln()) - (t / k_tilde).powf(p))
}

/// Vector of `n` i.i.d. two-point coordinates and its norm median.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalInstance {
    pub n: u64,
    pub law: ScalarLaw,
    pub alpha: f64,
    pub theta: f64,
    /// Lower median of `ΣY_i`.
    pub median_count: u64,
    /// `α·√(median_count)`.
    pub median_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl ExtremalInstance {
    /// Instance with `α = K(log(1/θ))^{1/p}`.
    pub fn new(n: u64, theta: f64, k: f64, p: f64) -> Result<Self> {
        let law = make_two_point(theta, k, p)?;
        let alpha = match law {
            ScalarLaw::TwoPoint { alpha, .. } => alpha,
            _ => unreachable!("two-point constructor"),
        };
        Self::build(n, theta, alpha, law)
    }

    pub fn with_alpha(n: u64, theta: f64, alpha: f64) -> Result<Self> {
        let law = ScalarLaw::two_point(theta, alpha)?;
        Self::build(n, theta, alpha, law)
    }

    fn build(n: u64, theta: f64, alpha: f64, law: ScalarLaw) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::param("alpha", format!("{alpha} must be positive")));
        }
        let median_count = binomial::binom_median(n, theta)?;
        Ok(Self { n, law, alpha, theta, median_count, median_norm: alpha * (median_count as f64).sqrt() })
    }

    /// `ln P{‖X‖₂ ≥ median + t}` (upper) or `ln P{‖X‖₂ ≤ median − t}` (lower).
    pub fn ln_norm_tail(&self, t: f64, side: Side) -> f64 {
        match side {
            Side::Upper => {
                let s = ((self.median_norm + t) / self.alpha).powi(2);
                binomial::ln_tail(self.n, self.theta, threshold_ceil(s).min(self.n + 1))
            }
            Side::Lower => {
                let r = self.median_norm - t;
                if r < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let s = (r / self.alpha).powi(2);
                let m = (s + 1e-12 * s.max(1.0)).floor() as u64;
                binomial::ln_cdf(self.n, self.theta, m)
            }
        }
    }

    pub fn norm_tail_exact(&self, t: f64, side: Side) -> f64 {
        self.ln_norm_tail(t, side).exp()
    }
}

/// `t²/(K²(log(2 + K²n/t²))^{2/p})`, the exponent of the matching lower bound.
pub fn lower_bound_exponent(n: f64, t: f64, k: f64, p: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let x = k * k * n / (t * t);
    (t / k).powi(2) / (2.0 + x).ln().powf(2.0 / p)
}

/// Inputs of [`optimality_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: u64,
    pub k: f64,
    pub p: f64,
    pub c_b: f64,
    /// Grid of `t`; empty means a log grid of `steps` points over the window.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Smallest `n` accepted as "sufficiently large".
    #[serde(default = "default_min_n")]
    pub min_n: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    32
}

fn default_min_n() -> u64 {
    1_000
}

impl SweepConfig {
    pub fn new(n: u64, k: f64, p: f64, c_b: f64) -> Self {
        Self { n, k, p, c_b, t_grid: Vec::new(), steps: default_steps(), min_n: default_min_n(), seed: 0 }
    }

    fn grid(&self) -> Vec<f64> {
        if !self.t_grid.is_empty() {
            return self.t_grid.clone();
        }
        let (lo, hi) = case_one_window(self.n, self.k, self.p, self.c_b);
        geomspace(lo, hi, self.steps)
    }
}

/// One CSV line of an optimality sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u64,
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub t: f64,
    pub theta: f64,
    pub alpha: f64,
    pub median_norm: f64,
    pub tail_upper_exact: f64,
    pub tail_lower_exact: f64,
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    #[serde(rename = "fitted_C")]
    pub fitted_big_c: f64,
    pub fitted_c: f64,
    pub seed: u64,
    pub branch: Branch,
    pub ln_tail_upper_exact: f64,
    pub ln_tail_lower_exact: f64,
    pub ln_envelope_upper: f64,
    pub ln_envelope_lower: f64,
    #[serde(rename = "fitted_C_upper")]
    pub fitted_big_c_upper: f64,
    #[serde(rename = "fitted_C_lower")]
    pub fitted_big_c_lower: f64,
}

/// Fitted constants and rows of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub upper: ConstantFit,
    pub lower: ConstantFit,
    /// `max` of the two sides; the envelope uses `c̃ = 1/C` and `C̃ = C`.
    pub fitted_big_c: f64,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    t: f64,
    exponent: f64,
    ln_tail: f64,
}

impl std::fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(t={:.6}, ln_tail={:.6})", self.t, self.ln_tail)
    }
}

/// `ln((1/C)·exp(−C·g))`.
fn ln_envelope(big_c: f64, exponent: f64) -> f64 {
    -big_c.ln() - big_c * exponent
}

/// Exact two-sided tails of the `θ(t)` construction over a `t` grid, with the
/// smallest `C` making `(1/C)exp(−C t²/(K²(log(2+K²n/t²))^{2/p}))` a lower
/// bound on each side.
pub fn optimality_sweep(cfg: &SweepConfig, opts: &FitOptions) -> Result<SweepReport> {
    if cfg.n < cfg.min_n {
        return Err(Error::Hypothesis(format!("n = {} is below the large-n gate {}", cfg.n, cfg.min_n)));
    }
    let grid = cfg.grid();
    if grid.is_empty() {
        return Err(Error::param("t_grid", "no grid points"));
    }
    let evaluated = grid
        .par_iter()
        .map(|&t| {
            let (theta, branch) = theta_of_t(cfg.n, t, cfg.k, cfg.p, cfg.c_b)?;
            let inst = ExtremalInstance::new(cfg.n, theta, cfg.k, cfg.p)?;
            let up = inst.ln_norm_tail(t, Side::Upper);
            let lo = inst.ln_norm_tail(t, Side::Lower);
            Ok((t, theta, branch, inst, up, lo))
        })
        .collect::<Result<Vec<_>>>()?;

    let nf = cfg.n as f64;
    let points = |lower: bool| -> Vec<SweepPoint> {
        evaluated
            .iter()
            .map(|(t, _, _, _, up, lo)| SweepPoint {
                t: *t,
                exponent: lower_bound_exponent(nf, *t, cfg.k, cfg.p),
                ln_tail: if lower { *lo } else { *up },
            })
            .collect()
    };
    let holds = |pt: &SweepPoint, c: f64| ln_envelope(c, pt.exponent) <= pt.ln_tail;
    let grid_desc = format!("n={}, K={}, p={}, c_b={}, {} t points", cfg.n, cfg.k, cfg.p, cfg.c_b, grid.len());
    let upper = fit_constant("C (upper tail)", &grid_desc, &points(false), holds, opts)?;
    let lower = fit_constant("C (lower tail)", &grid_desc, &points(true), holds, opts)?;
    let big_c = upper.fitted_value.max(lower.fitted_value);

    let rows = evaluated
        .iter()
        .map(|(t, theta, branch, inst, up, lo)| {
            let g = lower_bound_exponent(nf, *t, cfg.k, cfg.p);
            let env_up = ln_envelope(upper.fitted_value, g);
            let env_lo = ln_envelope(lower.fitted_value, g);
            SweepRow {
                n: cfg.n,
                p: cfg.p,
                k: cfg.k,
                t: *t,
                theta: *theta,
                alpha: inst.alpha,
                median_norm: inst.median_norm,
                tail_upper_exact: up.exp(),
                tail_lower_exact: lo.exp(),
                envelope_lower: env_lo.exp(),
                envelope_upper: env_up.exp(),
                fitted_big_c: big_c,
                fitted_c: 1.0 / big_c,
                seed: cfg.seed,
                branch: *branch,
                ln_tail_upper_exact: *up,
                ln_tail_lower_exact: *lo,
                ln_envelope_upper: env_up,
                ln_envelope_lower: env_lo,
                fitted_big_c_upper: upper.fitted_value,
                fitted_big_c_lower: lower.fitted_value,
            }
        })
        .collect();
    Ok(SweepReport { upper, lower, fitted_big_c: big_c, rows })
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `log(−log P)` against `log t`.
pub fn log_tail_slope(ts: &[f64], ln_tails: &[f64]) -> Result<f64> {
    if ts.len() != ln_tails.len() || ts.len() < 2 {
        return Err(Error::param("slope", "need at least two matching points"));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys = ln_tails
        .iter()
        .map(|&l| if l < 0.0 { Ok((-l).ln()) } else { Err(Error::param("slope", "tail must be below 1")) })
        .collect::<Result<Vec<f64>>>()?;
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Local log-tail slopes on both sides of the regime switch of the two-level bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSlopes {
    pub t_switch: f64,
    pub small_window: (f64, f64),
    /// Slope of the best two-point profile: for each `t` the largest exact
    /// upper tail over a log grid of admissible `θ`.
    pub small_slope: f64,
    /// Slope along the single `θ(t)` path, for comparison.
    pub small_slope_theta_path: f64,
    pub large_window: (f64, f64),
    /// Slope of the coordinate tail with `K̃ = K/2^{1/p}` (so its ψ_p norm is `K`).
    pub large_slope: f64,
}

/// Settings of [`regime_slopes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub n: u64,
    pub k: f64,
    pub p: f64,
    pub c_b: f64,
    pub t_points: usize,
    pub theta_points: usize,
}

impl RegimeConfig {
    pub fn new(n: u64, k: f64, p: f64) -> Self {
        Self { n, k, p, c_b: 0.1, t_points: 24, theta_points: 150 }
    }
}

/// Small-`t` window `[window start, T/4]` and large-`t` window `[4T, 16T]`,
/// with `T = K(log n)^{2/(p(2−p))}`.
pub fn regime_slopes(cfg: &RegimeConfig) -> Result<RegimeSlopes> {
    if !(cfg.p >= 1.0 && cfg.p < 2.0) {
        return Err(Error::param("p", "regime switch needs p in [1, 2)"));
    }
    let nf = cfg.n as f64;
    let t_switch = cfg.k * nf.ln().powf(2.0 / (cfg.p * (2.0 - cfg.p)));
    let (win_lo, win_hi) = case_one_window(cfg.n, cfg.k, cfg.p, cfg.c_b);
    let small = (win_lo, (t_switch / 4.0).min(win_hi));
    if !(small.0 < small.1) {
        return Err(Error::Hypothesis(format!("small-t window {small:?} is empty")));
    }
    let ts = geomspace(small.0, small.1, cfg.t_points);

    let thetas = geomspace(1.0 / (cfg.c_b * nf), cfg.c_b, cfg.theta_points);
    let instances = thetas
        .par_iter()
        .map(|&th| ExtremalInstance::new(cfg.n, th, cfg.k, cfg.p))
        .collect::<Result<Vec<_>>>()?;
    let best: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            instances.iter().map(|inst| inst.ln_norm_tail(t, Side::Upper)).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let small_slope = log_tail_slope(&ts, &best)?;

    let path = ts
        .iter()
        .map(|&t| {
            let (theta, _) = theta_of_t(cfg.n, t, cfg.k, cfg.p, cfg.c_b)?;
            Ok(ExtremalInstance::new(cfg.n, theta, cfg.k, cfg.p)?.ln_norm_tail(t, Side::Upper))
        })
        .collect::<Result<Vec<f64>>>()?;
    let small_slope_theta_path = log_tail_slope(&ts, &path)?;

    let large = (4.0 * t_switch, 16.0 * t_switch);
    let k_tilde = cfg.k / 2f64.powf(1.0 / cfg.p);
    let lts = geomspace(large.0, large.1, cfg.t_points);
    let coord = lts.iter().map(|&t| ln_coordinate_tail(t, k_tilde, cfg.p)).collect::<Result<Vec<f64>>>()?;
    let large_slope = log_tail_slope(&lts, &coord)?;

    Ok(RegimeSlopes { t_switch, small_window: small, small_slope, small_slope_theta_path, large_window: large, large_slope })
}
