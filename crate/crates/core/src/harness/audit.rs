//! Monte Carlo audit of the upper envelopes with fitted constants.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    clopper_pearson, count_deviations_sorted, derive_seed, estimate_median, sample_values, FunctionSpec, Method,
    ProductLaw, CI_LEVEL,
};
use crate::envelopes::{self, EnvelopeParams, PROOF_TRACED_C};
use crate::extremal::Side;
use crate::measures::ScalarLaw;
use crate::{Error, Result};

/// One law family: `n` i.i.d. copies of `law`, audited against the
/// subgaussian envelope (`p = 2`) or the two-level `ψ_p` envelope (`p < 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditCase {
    pub name: String,
    pub law: ScalarLaw,
    pub n: usize,
    pub p: f64,
    /// Overrides [`AuditConfig::functions`] for this case.
    #[serde(default)]
    pub functions: Option<Vec<FunctionSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub cases: Vec<AuditCase>,
    pub functions: Vec<FunctionSpec>,
    /// Deviation levels in units of the case's `ψ_p` norm `K`.
    pub t_over_k: Vec<f64>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_preset")]
    pub preset_c: f64,
}

fn default_preset() -> f64 {
    PROOF_TRACED_C
}

impl AuditConfig {
    /// Rademacher, sparse two-point and exponential-power coordinates with
    /// `n = 100`, plus a distance-to-polytope function in dimension 6.
    pub fn standard(samples: usize, seed: u64) -> Result<Self> {
        let default_fns = vec![FunctionSpec::EuclideanNorm, FunctionSpec::Linear { a: None }, FunctionSpec::MaxCoordinate];
        let polytope = vec![
            vec![1.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, -0.5, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.5],
            vec![-1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.0, 1.0, 1.0, 1.0],
        ];
        let case = |name: &str, law: ScalarLaw, n: usize, p: f64| AuditCase { name: name.into(), law, n, p, functions: None };
        Ok(Self {
            cases: vec![
                case("rademacher", ScalarLaw::rademacher(), 100, 2.0),
                case("two_point_sparse", crate::measures::make_two_point(0.05, 1.0, 2.0)?, 100, 2.0),
                case("exp_power_2", crate::measures::make_exp_power(2.0, 1.0)?, 100, 2.0),
                case("exp_power_1", crate::measures::make_exp_power(1.0, 1.0)?, 100, 1.0),
                AuditCase {
                    functions: Some(vec![FunctionSpec::DistToConvex { points: polytope }, FunctionSpec::EuclideanNorm]),
                    ..case("rademacher_polytope", ScalarLaw::rademacher(), 6, 2.0)
                },
            ],
            functions: default_fns,
            t_over_k: crate::numeric::geomspace(0.1, 5.0, 16),
            samples,
            seed,
            preset_c: PROOF_TRACED_C,
        })
    }
}

/// One `(case, function, t)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub case: String,
    pub law: String,
    pub n: usize,
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub function: String,
    pub t: f64,
    pub median: f64,
    pub median_method: Method,
    pub tail_upper: f64,
    pub tail_lower: f64,
    pub ci_high_upper: f64,
    pub ci_high_lower: f64,
    pub hits_upper: u64,
    pub hits_lower: u64,
    pub samples: u64,
    /// Largest constant whose envelope still covers both upper CI endpoints.
    pub cell_max_c: f64,
    pub envelope_fitted: f64,
    /// Envelope at the preset constant (subgaussian cases only).
    pub envelope_preset: Option<f64>,
    pub seed: u64,
}

/// Fitted constant of one law family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyFit {
    pub case: String,
    pub constant_name: String,
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub n: usize,
    pub fitted: f64,
    /// Cell that binds the fit: `(function, t)`.
    pub binding: (String, f64),
    pub violations_at_fitted: usize,
    pub preset_c: Option<f64>,
    /// Smallest `C′ ≥ 1` such that the preset holds at every cell with
    /// `t ≥ C′K√(log n)`.
    pub preset_valid_from: Option<f64>,
    /// Cells with `t ≥ C′K√(log n)`.
    pub preset_cells_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeAudit {
    pub rows: Vec<AuditRow>,
    pub fits: Vec<FamilyFit>,
    /// Hard failures: a CI endpoint above the envelope at a fitted constant.
    pub violations: Vec<String>,
}

impl EnvelopeAudit {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `ln` of the envelope at constant `c`.
fn ln_envelope(params: &EnvelopeParams, c: f64, t: f64) -> Result<f64> {
    if params.p == 2.0 {
        envelopes::ln_subgaussian_envelope(&params.clone().with(envelopes::C, c)?, t)
    } else {
        Ok(envelopes::psip_envelope(&params.clone().with(envelopes::C_P, c)?, t)?.ln_sum.min(0.0))
    }
}

/// Largest `c` with `envelope(c, t) ≥ target`; the envelope decreases in `c`.
fn max_admissible(params: &EnvelopeParams, t: f64, target: f64) -> Result<f64> {
    if target <= 0.0 || t == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ln_target = target.ln();
    if params.p == 2.0 {
        let g = -envelopes::ln_subgaussian_envelope(&params.clone().with(envelopes::C, 1.0)?, t)?;
        return Ok(if g > 0.0 { -ln_target / g } else { f64::INFINITY });
    }
    let ok = |c: f64| ln_envelope(params, c, t).map(|v| v >= ln_target);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

struct CellData {
    function: String,
    t: f64,
    median: f64,
    median_method: Method,
    hits: (u64, u64),
    ci_high: (f64, f64),
    max_c: f64,
}

/// Compares the 99% upper CI endpoints of both empirical tails with the
/// envelope, fits the largest admissible constant per case, and locates the
/// range where the preset constant holds.
pub fn verify_upper_envelopes(cfg: &AuditConfig) -> Result<EnvelopeAudit> {
    if cfg.t_over_k.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::param("t_over_k", "levels must be positive"));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut violations = Vec::new();
    for (ci, case) in cfg.cases.iter().enumerate() {
        let law = ProductLaw::iid(case.law.clone(), case.n)?;
        let k = law.psi_p_norm(case.p)?;
        let params = EnvelopeParams::new(k, case.p, case.n as f64)?;
        let specs = case.functions.as_ref().unwrap_or(&cfg.functions);
        let fs = specs.iter().map(|s| s.build(case.n)).collect::<Result<Vec<_>>>()?;
        for (fi, f) in fs.iter().enumerate() {
            f.audit(case.n, 1000, derive_seed(cfg.seed, 1_000 + fi as u64))?;
        }
        let seed = derive_seed(cfg.seed, ci as u64);
        let medians = fs
            .iter()
            .enumerate()
            .map(|(fi, f)| estimate_median(f, &law, cfg.samples, derive_seed(derive_seed(seed, 0), fi as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut values = sample_values(&fs, &law, cfg.samples, derive_seed(seed, 1))?;
        values.par_iter_mut().for_each(|v| v.sort_by(f64::total_cmp));

        let mut cells = Vec::new();
        for ((f, med), vals) in fs.iter().zip(&medians).zip(&values) {
            for &tk in &cfg.t_over_k {
                let t = tk * k;
                let up = count_deviations_sorted(vals, med.value, t, Side::Upper);
                let lo = count_deviations_sorted(vals, med.value, t, Side::Lower);
                let m = cfg.samples as u64;
                let hi_up = clopper_pearson(up, m, CI_LEVEL)?.1;
                let hi_lo = clopper_pearson(lo, m, CI_LEVEL)?.1;
                let max_c = max_admissible(&params, t, hi_up.max(hi_lo))?;
                cells.push(CellData {
                    function: f.to_string(),
                    t,
                    median: med.value,
                    median_method: med.method,
                    hits: (up, lo),
                    ci_high: (hi_up, hi_lo),
                    max_c,
                });
            }
        }

        let binding = cells
            .iter()
            .enumerate()
            .fold(0, |b, (i, c)| if c.max_c < cells[b].max_c { i } else { b });
        let fitted = cells[binding].max_c * (1.0 - 1e-9);
        let mut fit_violations = 0;
        let ln_n_sqrt = (case.n as f64).ln().sqrt();
        let mut preset_bad_ratio = 0.0f64;
        for c in &cells {
            let target = c.ci_high.0.max(c.ci_high.1);
            let env = ln_envelope(&params, fitted, c.t)?.exp();
            if fitted.is_finite() && env < target {
                fit_violations += 1;
                violations.push(format!(
                    "{}: {} at t = {}: upper CI {} above envelope {} at fitted constant {}",
                    case.name, c.function, c.t, target, env, fitted
                ));
            }
            let env_preset = if case.p == 2.0 { Some(ln_envelope(&params, cfg.preset_c, c.t)?.exp()) } else { None };
            if let Some(e) = env_preset {
                if e < target {
                    preset_bad_ratio = preset_bad_ratio.max(c.t / (k * ln_n_sqrt));
                }
            }
            rows.push(AuditRow {
                case: case.name.clone(),
                law: case.law.to_string(),
                n: case.n,
                p: case.p,
                k,
                function: c.function.clone(),
                t: c.t,
                median: c.median,
                median_method: c.median_method,
                tail_upper: c.hits.0 as f64 / cfg.samples as f64,
                tail_lower: c.hits.1 as f64 / cfg.samples as f64,
                ci_high_upper: c.ci_high.0,
                ci_high_lower: c.ci_high.1,
                hits_upper: c.hits.0,
                hits_lower: c.hits.1,
                samples: cfg.samples as u64,
                cell_max_c: c.max_c,
                envelope_fitted: env,
                envelope_preset: env_preset,
                seed,
            });
        }
        let (preset_c, preset_valid_from, preset_cells_checked) = if case.p == 2.0 {
            let from = if preset_bad_ratio > 0.0 { (preset_bad_ratio * (1.0 + 1e-9)).max(1.0) } else { 1.0 };
            let checked = cells.iter().filter(|c| c.t >= from * k * ln_n_sqrt).count();
            (Some(cfg.preset_c), Some(from), checked)
        } else {
            (None, None, 0)
        };
        fits.push(FamilyFit {
            case: case.name.clone(),
            constant_name: if case.p == 2.0 { envelopes::C } else { envelopes::C_P }.to_string(),
            p: case.p,
            k,
            n: case.n,
            fitted,
            binding: (cells[binding].function.clone(), cells[binding].t),
            violations_at_fitted: fit_violations,
            preset_c,
            preset_valid_from,
            preset_cells_checked,
        });
    }
    Ok(EnvelopeAudit { rows, fits, violations })
}
