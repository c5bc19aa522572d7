//! Fitting universal constants on parameter grids.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{envelope_exponent, ln_chernoff_upper, ln_paper_lower_envelope, ln_tail, threshold_ceil, BinomQuery};
use crate::numeric::geomspace;
use crate::{Error, Result};

/// Search range and precision for [`fit_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub lower: f64,
    pub cap: f64,
    pub rel_tol: f64,
    /// Number of grid points on which monotonicity in the constant is checked.
    pub monotonicity_sample: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { lower: 1.0, cap: 1e4, rel_tol: 1e-3, monotonicity_sample: 16 }
    }
}

/// A fitted constant and the grid point that forced its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantFit {
    pub constant_name: String,
    pub fitted_value: f64,
    pub grid: String,
    pub grid_points: usize,
    pub worst_index: usize,
    pub worst_point: String,
}

/// Smallest constant in `[lower, cap]`, to relative precision, for which
/// `holds(point, c)` is true. The returned value always satisfies the predicate.
fn minimal_constant<G, P>(point: &G, holds: &P, opts: &FitOptions) -> Option<f64>
where
    P: Fn(&G, f64) -> bool,
{
    if holds(point, opts.lower) {
        return Some(opts.lower);
    }
    if !holds(point, opts.cap) {
        return None;
    }
    let (mut lo, mut hi) = (opts.lower, opts.cap);
    while hi / lo - 1.0 > opts.rel_tol {
        let mid = (lo * hi).sqrt();
        if holds(point, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Per-point minimal constants, in grid order.
pub(crate) fn per_point_constants<G, P>(points: &[G], holds: &P, opts: &FitOptions) -> Result<Vec<f64>>
where
    G: fmt::Display + Sync,
    P: Fn(&G, f64) -> bool + Sync,
{
    let needs: Vec<Option<f64>> = points.par_iter().map(|g| minimal_constant(g, holds, opts)).collect();
    needs
        .into_iter()
        .zip(points)
        .map(|(need, g)| need.ok_or_else(|| Error::FitFailed { cap: opts.cap, point: g.to_string() }))
        .collect()
}

fn check_monotone<G, P>(points: &[G], holds: &P, opts: &FitOptions) -> Result<()>
where
    G: fmt::Display,
    P: Fn(&G, f64) -> bool,
{
    if points.is_empty() || opts.monotonicity_sample == 0 {
        return Ok(());
    }
    let stride = (points.len() / opts.monotonicity_sample).max(1);
    let steps = 32;
    for g in points.iter().step_by(stride) {
        let mut seen_true = false;
        for i in 0..=steps {
            let c = opts.lower * (opts.cap / opts.lower).powf(i as f64 / steps as f64);
            let h = holds(g, c);
            if seen_true && !h {
                return Err(Error::Hypothesis(format!(
                    "predicate is not monotone in the constant at {g} (fails at {c})"
                )));
            }
            seen_true |= h;
        }
    }
    Ok(())
}

/// Smallest constant making `holds` true at every grid point.
///
/// The predicate must be monotone in the constant (once true, true for all
/// larger values); this is checked on a sample of points.
pub fn fit_constant<G, P>(
    constant_name: &str,
    grid: &str,
    points: &[G],
    holds: P,
    opts: &FitOptions,
) -> Result<ConstantFit>
where
    G: fmt::Display + Sync,
    P: Fn(&G, f64) -> bool + Sync,
{
    if points.is_empty() {
        return Err(Error::param("grid", "no grid points"));
    }
    if !(opts.lower > 0.0 && opts.cap >= opts.lower && opts.rel_tol > 0.0) {
        return Err(Error::param("options", format!("{opts:?}")));
    }
    check_monotone(points, &holds, opts)?;
    let needs = per_point_constants(points, &holds, opts)?;
    let mut worst = 0;
    for (i, &c) in needs.iter().enumerate() {
        if c > needs[worst] {
            worst = i;
        }
    }
    Ok(ConstantFit {
        constant_name: constant_name.to_string(),
        fitted_value: needs[worst],
        grid: grid.to_string(),
        grid_points: points.len(),
        worst_index: worst,
        worst_point: points[worst].to_string(),
    })
}

/// Grid for the binomial lower-envelope inequality.
///
/// For every `n`, `θ` runs over a log grid on `[max(min_mean/n, theta_floor), theta_hi]`
/// and `r` over `0`, a log grid below and above `θn`, the largest value `n − θn`,
/// and `adversarial` values just past consecutive integer thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinomialGridSpec {
    pub ns: Vec<u64>,
    pub theta_hi: f64,
    pub theta_floor: f64,
    pub min_mean: f64,
    pub theta_points: usize,
    pub r_points: usize,
    pub adversarial: usize,
    /// Multiplies `theta_points` and `r_points`.
    pub refine: usize,
    pub c_b: f64,
    /// Rounds of local θ refinement around the binding points during a fit.
    pub zoom_levels: usize,
    pub zoom_points: usize,
    pub zoom_top: usize,
}

impl Default for BinomialGridSpec {
    fn default() -> Self {
        Self {
            ns: vec![100, 1_000, 10_000, 100_000],
            theta_hi: 0.05,
            theta_floor: 1e-4,
            min_mean: 10.0,
            theta_points: 6,
            r_points: 4,
            adversarial: 6,
            refine: 1,
            c_b: 0.1,
            zoom_levels: 3,
            zoom_points: 64,
            zoom_top: 4,
        }
    }
}

impl BinomialGridSpec {
    fn theta_range(&self, n: u64) -> Option<(f64, f64)> {
        let lo = (self.min_mean / n as f64).max(self.theta_floor);
        (lo <= self.theta_hi).then_some((lo, self.theta_hi))
    }

    fn describe(&self) -> String {
        format!(
            "n in {:?}, theta log-grid of {} points on [max({}/n, {}), {}], r: {} log points per side, {} threshold-adjacent values",
            self.ns,
            self.theta_points * self.refine,
            self.min_mean,
            self.theta_floor,
            self.theta_hi,
            self.r_points * self.refine,
            self.adversarial
        )
    }
}

/// One `(n, θ, r)` point with its exact log tail at `k = ⌈θn + r⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialPoint {
    pub n: u64,
    pub theta: f64,
    pub r: f64,
    pub k: u64,
    pub ln_tail: f64,
}

impl fmt::Display for BinomialPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, theta={:.6e}, r={:.6}, k={})", self.n, self.theta, self.r, self.k)
    }
}

impl BinomialPoint {
    fn new(n: u64, theta: f64, r: f64) -> Self {
        let k = threshold_ceil(theta * n as f64 + r).min(n);
        Self { n, theta, r, k, ln_tail: ln_tail(n, theta, k) }
    }

    /// Whether the envelope with constant `big_c` lies below the exact tail.
    pub fn envelope_holds(&self, big_c: f64, c_b: f64) -> bool {
        match ln_paper_lower_envelope(self.n, self.theta, self.r, big_c, c_b) {
            Ok(env) => env <= self.ln_tail,
            Err(_) => false,
        }
    }
}

fn r_values(n: u64, theta: f64, spec: &BinomialGridSpec) -> Vec<f64> {
    let mean = theta * n as f64;
    let r_max = n as f64 - mean;
    let m = spec.r_points * spec.refine;
    let mut rs = vec![0.0];
    rs.extend(geomspace(0.01, 1.0, m).into_iter().map(|f| f * mean));
    rs.extend(geomspace(1.0, r_max / mean, m).into_iter().map(|f| (f * mean).min(r_max)));
    // Just past an integer the threshold jumps while the envelope barely moves.
    let eta = 1e-9 * mean.max(1.0);
    for j in 0..spec.adversarial {
        let r = mean.floor() + j as f64 - mean + eta;
        if r > 0.0 && r <= r_max {
            rs.push(r);
        }
    }
    rs.push(r_max);
    rs
}

fn points_at(n: u64, thetas: &[f64], spec: &BinomialGridSpec) -> Vec<(u64, f64, f64)> {
    thetas.iter().flat_map(|&th| r_values(n, th, spec).into_iter().map(move |r| (n, th, r))).collect()
}

fn evaluate(raw: Vec<(u64, f64, f64)>) -> Vec<BinomialPoint> {
    raw.into_par_iter().map(|(n, th, r)| BinomialPoint::new(n, th, r)).collect()
}

/// All grid points of `spec` (without zoom refinement). `n` values whose θ
/// window is empty contribute nothing.
pub fn binomial_grid(spec: &BinomialGridSpec) -> Vec<BinomialPoint> {
    let mut raw = Vec::new();
    for &n in &spec.ns {
        if let Some((lo, hi)) = spec.theta_range(n) {
            let thetas = geomspace(lo, hi, spec.theta_points * spec.refine);
            raw.extend(points_at(n, &thetas, spec));
        }
    }
    evaluate(raw)
}

/// Fits `C_b` in `(1/C_b)·exp(−C_b·log(2+(θn+r)/(θn))·r²/(θn+r)) ≤ P{Bin ≥ ⌈θn+r⌉}`.
///
/// After the base grid, θ is refined locally around the `zoom_top` binding
/// points so the fitted value approaches the supremum over θ.
pub fn fit_binomial_lower(spec: &BinomialGridSpec, opts: &FitOptions) -> Result<(ConstantFit, Vec<BinomialPoint>)> {
    let c_b = spec.c_b;
    let holds = |p: &BinomialPoint, c: f64| p.envelope_holds(c, c_b);
    let mut points = binomial_grid(spec);
    if points.is_empty() {
        return Err(Error::param("grid", "every n has an empty theta window"));
    }
    let needs = per_point_constants(&points, &holds, opts)?;
    let base_steps = spec.theta_points * spec.refine;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| needs[b].total_cmp(&needs[a]).then(a.cmp(&b)));
    let mut centres: Vec<(u64, f64)> = Vec::new();
    for i in order {
        let p = points[i];
        if centres.len() >= spec.zoom_top {
            break;
        }
        if !centres.iter().any(|&(n, th)| n == p.n && th == p.theta) {
            centres.push((p.n, p.theta));
        }
    }

    for (n, centre) in centres {
        let Some((lo, hi)) = spec.theta_range(n) else { continue };
        let mut step = if base_steps > 1 { (hi / lo).powf(1.0 / (base_steps - 1) as f64) } else { 1.0 };
        let mut centre = centre;
        for _ in 0..spec.zoom_levels {
            if step <= 1.0 || spec.zoom_points < 2 {
                break;
            }
            let a = (centre / step).max(lo);
            let b = (centre * step).min(hi);
            let thetas = geomspace(a, b, spec.zoom_points);
            let zoomed = evaluate(points_at(n, &thetas, spec));
            let zneeds = per_point_constants(&zoomed, &holds, opts)?;
            let best = zneeds
                .iter()
                .enumerate()
                .fold(0, |w, (i, &c)| if c > zneeds[w] { i } else { w });
            centre = zoomed[best].theta;
            step = (b / a).powf(1.0 / (spec.zoom_points - 1) as f64);
            points.extend(zoomed);
        }
    }

    let fit = fit_constant("C_b", &spec.describe(), &points, holds, opts)?;
    Ok((fit, points))
}

/// One CSV line of a binomial report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialReportRow {
    pub n: u64,
    pub theta: f64,
    pub r: f64,
    pub exact_tail: f64,
    pub chernoff: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub k: u64,
    pub ln_exact_tail: f64,
    pub ln_chernoff: f64,
    pub ln_envelope: f64,
    pub ln_ratio: f64,
}

impl BinomialReportRow {
    pub fn new(p: &BinomialPoint, big_c: f64) -> Self {
        let q = BinomQuery { n: p.n, theta: p.theta, k: p.k };
        let ln_chernoff = ln_chernoff_upper(q);
        let mean = p.theta * p.n as f64;
        let ln_envelope = -big_c.ln() - big_c * envelope_exponent(mean, p.r);
        let ln_ratio = ln_envelope - p.ln_tail;
        Self {
            n: p.n,
            theta: p.theta,
            r: p.r,
            exact_tail: p.ln_tail.exp(),
            chernoff: ln_chernoff.exp(),
            envelope: ln_envelope.exp(),
            ratio: ln_ratio.exp(),
            k: p.k,
            ln_exact_tail: p.ln_tail,
            ln_chernoff,
            ln_envelope,
            ln_ratio,
        }
    }
}

/// Writes one row per grid point with envelope constant `big_c`.
pub fn write_binomial_report<W: Write>(out: W, points: &[BinomialPoint], big_c: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(BinomialReportRow::new(p, big_c))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Pt(f64);
    impl fmt::Display for Pt {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "pt({})", self.0)
        }
    }

    #[test]
    fn single_point_holding_at_one() {
        let fit = fit_constant("C", "one point", &[Pt(0.5)], |p, c| p.0 <= c, &FitOptions::default()).unwrap();
        assert!(fit.fitted_value <= 1.0 + 1e-3);
    }

    #[test]
    fn fitted_value_is_threshold() {
        let pts = [Pt(3.0), Pt(17.0), Pt(5.0)];
        let fit = fit_constant("C", "three", &pts, |p, c| p.0 <= c, &FitOptions::default()).unwrap();
        assert!(fit.fitted_value >= 17.0 && fit.fitted_value <= 17.0 * 1.001);
        assert_eq!(fit.worst_index, 1);
        assert_eq!(fit.worst_point, "pt(17)");
    }

    #[test]
    fn failure_names_point() {
        let pts = [Pt(3.0), Pt(2e4)];
        match fit_constant("C", "cap", &pts, |p, c| p.0 <= c, &FitOptions::default()) {
            Err(Error::FitFailed { cap, point }) => {
                assert_eq!(cap, 1e4);
                assert_eq!(point, "pt(20000)");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_predicate_rejected() {
        let r = fit_constant("C", "bad", &[Pt(1.0)], |_, c| c < 10.0, &FitOptions::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn small_binomial_fit() {
        let spec = BinomialGridSpec { ns: vec![1000], zoom_levels: 1, zoom_points: 8, ..Default::default() };
        let (fit, points) = fit_binomial_lower(&spec, &FitOptions::default()).unwrap();
        assert!(fit.fitted_value.is_finite() && fit.fitted_value > 1.0);
        for p in &points {
            assert!(p.envelope_holds(fit.fitted_value, spec.c_b), "{p}");
        }
        let mut buf = Vec::new();
        write_binomial_report(&mut buf, &points[..3], fit.fitted_value).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,theta,r,exact_tail,chernoff,envelope,ratio"));
    }
}
