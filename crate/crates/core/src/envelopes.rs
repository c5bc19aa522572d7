//! Closed-form tail envelopes, regime crossovers and the truncation schedule.
//!
//! Every envelope is clamped to `[0, 1]`. Log versions (`ln_*`) are provided
//! because the lower envelopes are compared against tails far below `f64` range.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Envelope constant of the subgaussian upper bound obtained by tracing the
/// constants through its proof.
pub const PROOF_TRACED_C: f64 = 1.0 / 2048.0;

pub const C: &str = "c";
pub const C_P: &str = "c_p";
pub const C_TILDE: &str = "c_tilde";
pub const BIG_C_TILDE: &str = "C_tilde";

/// Scale, exponent, dimension and named constants of an envelope.
///
/// `n` is a real number so that astronomically large dimensions (e.g. `e^100`)
/// can be represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    pub k: f64,
    pub p: f64,
    pub n: f64,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

impl EnvelopeParams {
    pub fn new(k: f64, p: f64, n: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::param("K", format!("{k} must be positive")));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::param("p", format!("{p} is outside [1, 2]")));
        }
        if !(n >= 1.0) {
            return Err(Error::param("n", format!("{n} must be at least 1")));
        }
        Ok(Self { k, p, n, constants: BTreeMap::new() })
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::param("constant", format!("{name} = {value} must be positive")));
        }
        self.constants.insert(name.to_string(), value);
        Ok(self)
    }

    /// Subgaussian parameters with the proof-traced constant `c = 1/2048`.
    pub fn proof_traced_subgaussian(k: f64, n: f64) -> Result<Self> {
        Self::new(k, 2.0, n)?.with(C, PROOF_TRACED_C)
    }

    pub fn constant(&self, name: &str) -> Result<f64> {
        match self.constants.get(name) {
            Some(&v) if v > 0.0 => Ok(v),
            Some(&v) => Err(Error::param("constant", format!("{name} = {v} must be positive"))),
            None => Err(Error::param("constant", format!("`{name}` is not set"))),
        }
    }

    fn ln_n(&self) -> f64 {
        self.n.ln()
    }

    fn require_subgaussian(&self) -> Result<()> {
        if self.p != 2.0 {
            return Err(Error::param("p", format!("subgaussian envelopes need p = 2, got {}", self.p)));
        }
        Ok(())
    }

    fn require_psip(&self) -> Result<()> {
        if !(self.p < 2.0) {
            return Err(Error::param("p", format!("two-level envelope needs p in [1, 2), got {}", self.p)));
        }
        if self.n < 2.0 {
            return Err(Error::param("n", "two-level envelope needs n ≥ 2"));
        }
        Ok(())
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("{t} must be finite and nonnegative")));
    }
    Ok(())
}

/// `t²/(K² log(2 + K²n/t²))`, the common exponent of the subgaussian bounds.
fn subgaussian_exponent(k: f64, n: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let x = (k / t).powi(2) * n;
    (t / k).powi(2) / (2.0 + x).ln()
}

/// `ln min(1, exp(−c t²/(K² log(2 + K²n/t²))))`.
pub fn ln_subgaussian_envelope(params: &EnvelopeParams, t: f64) -> Result<f64> {
    params.require_subgaussian()?;
    check_t(t)?;
    let c = params.constant(C)?;
    Ok((-c * subgaussian_exponent(params.k, params.n, t)).min(0.0))
}

pub fn subgaussian_envelope(params: &EnvelopeParams, t: f64) -> Result<f64> {
    ln_subgaussian_envelope(params, t).map(f64::exp)
}

/// Which summand of the two-level envelope is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantTerm {
    /// `2exp(−c_p t^p/K^p)`.
    PsiP,
    /// `2exp(−c_p t²/(K²(log n)^{2/p}))`.
    Subgaussian,
}

impl fmt::Display for DominantTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DominantTerm::PsiP => "psi_p term",
            DominantTerm::Subgaussian => "subgaussian term",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelValue {
    /// `min(1, sum)`.
    pub value: f64,
    /// `ln` of the unclamped sum.
    pub ln_sum: f64,
    pub dominant: DominantTerm,
}

/// `min(1, 2exp(−c_p t^p/K^p) + 2exp(−c_p t²/(K²(log n)^{2/p})))`.
pub fn psip_envelope(params: &EnvelopeParams, t: f64) -> Result<TwoLevelValue> {
    params.require_psip()?;
    check_t(t)?;
    let cp = params.constant(C_P)?;
    let s = t / params.k;
    let a = -cp * s.powf(params.p);
    let b = -cp * s * s / params.ln_n().powf(2.0 / params.p);
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let ln_sum = 2f64.ln() + hi + (lo - hi).exp().ln_1p();
    let dominant = if a >= b { DominantTerm::PsiP } else { DominantTerm::Subgaussian };
    Ok(TwoLevelValue { value: ln_sum.min(0.0).exp(), ln_sum, dominant })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerKind {
    Psip,
    Subgaussian,
}

/// `ln` of the lower envelopes:
/// `c̃·max(exp(−C̃t²/(K²(log n)^{2/p})), exp(−C̃t^p/K^p))` or
/// `c̃·exp(−C̃t²/(K² log(2 + K²n/t²)))`.
pub fn ln_lower_envelope(params: &EnvelopeParams, t: f64, which: LowerKind) -> Result<f64> {
    check_t(t)?;
    let small = params.constant(C_TILDE)?;
    let big = params.constant(BIG_C_TILDE)?;
    let s = t / params.k;
    let exponent = match which {
        LowerKind::Psip => {
            if params.n < 2.0 {
                return Err(Error::param("n", "two-level envelope needs n ≥ 2"));
            }
            let gauss = s * s / params.ln_n().powf(2.0 / params.p);
            let heavy = s.powf(params.p);
            gauss.min(heavy)
        }
        LowerKind::Subgaussian => {
            params.require_subgaussian()?;
            subgaussian_exponent(params.k, params.n, t)
        }
    };
    Ok((small.ln() - big * exponent).min(0.0))
}

pub fn lower_envelope(params: &EnvelopeParams, t: f64, which: LowerKind) -> Result<f64> {
    ln_lower_envelope(params, t, which).map(f64::exp)
}

/// Scales below which no concentration occurs and above which the `ψ_p`
/// summand dominates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCrossover {
    /// `K(log n)^{1/p}`.
    pub t_no_conc: f64,
    /// `K(log n)^{2/(p(2−p))}`; infinite when it overflows.
    pub t_switch: f64,
    pub switch_diverges: bool,
}

pub fn regime_crossover(params: &EnvelopeParams) -> Result<RegimeCrossover> {
    if params.p >= 2.0 {
        return Err(Error::param("p", "the crossover exponent 2/(p(2−p)) is singular at p = 2"));
    }
    let ln_n = params.ln_n();
    let t_no_conc = params.k * ln_n.powf(1.0 / params.p);
    let t_switch = params.k * ln_n.powf(2.0 / (params.p * (2.0 - params.p)));
    Ok(RegimeCrossover { t_no_conc, t_switch, switch_diverges: !t_switch.is_finite() })
}

/// Default multiple of `K(log n)^{1/p}` above which the truncation schedule
/// exists (the smallest `t` giving `m ≥ 1`).
pub const DEFAULT_SCHEDULE_THRESHOLD: f64 = 16.0;

/// Largest `m` with `t²/(2^{2m+6}K²(log n)^{2/p}) ≥ 1`, if it is at least 1.
pub fn largest_truncation_index(params: &EnvelopeParams, t: f64) -> Result<u32> {
    check_t(t)?;
    if params.n <= 1.0 {
        return Err(Error::param("n", "log n must be positive"));
    }
    let ratio = (t / params.k).powi(2) / params.ln_n().powf(2.0 / params.p);
    if !(ratio >= 256.0) {
        return Err(Error::Hypothesis(format!(
            "no valid m: t = {t} is below 16·K(log n)^(1/p) = {}",
            16.0 * params.k * params.ln_n().powf(1.0 / params.p)
        )));
    }
    // 2^{2m+6} ≤ ratio ⇔ m ≤ (log2(ratio) − 6)/2; the loop corrects rounding.
    let mut m = ((ratio.log2() - 6.0) / 2.0).floor().max(1.0) as u32;
    while m > 1 && 2f64.powi(2 * m as i32 + 6) > ratio {
        m -= 1;
    }
    while 2f64.powi(2 * (m + 1) as i32 + 6) <= ratio {
        m += 1;
    }
    Ok(m)
}

/// Weights `u_k = c̃·2^{−(2−p)|m−k|/4}` with `Σ_{k≥1} u_k = 1/2`, and the
/// truncation levels `2·2^k·K(log n)^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSchedule {
    pub m: u32,
    pub c_tilde: f64,
    /// `u[i]` is `u_{i+1}`.
    pub u: Vec<f64>,
    pub levels: Vec<f64>,
    /// Mass `Σ_{k > len} u_k` dropped by truncating the sequence.
    pub truncated_tail: f64,
}

/// Most weights ever materialized by [`truncation_schedule`].
pub const MAX_SCHEDULE_LEN: usize = 2_000_000;

pub fn truncation_schedule(params: &EnvelopeParams, t: f64) -> Result<TruncationSchedule> {
    if params.p >= 2.0 {
        return Err(Error::param("p", "weights 2^{−(2−p)|m−k|/4} are not summable at p = 2"));
    }
    let m = largest_truncation_index(params, t)?;
    Ok(schedule_for(m, params.p, params.k, params.n.ln()))
}

pub(crate) fn schedule_for(m: u32, p: f64, k: f64, ln_n: f64) -> TruncationSchedule {
    let rho = 2f64.powf(-(2.0 - p) / 4.0);
    let one_minus = -(rho.ln()).exp_m1();
    // Σ_{k≥1} ρ^{|m−k|} = Σ_{j<m} ρ^j + Σ_{j≥1} ρ^j.
    let below = -(m as f64 * rho.ln()).exp_m1() / one_minus;
    let total = below + rho / one_minus;
    let c_tilde = 0.5 / total;
    // Extend past m until the remaining mass is negligible.
    let mut beyond = 200usize;
    while c_tilde * rho.powi(beyond as i32 + 1) / one_minus > 1e-13 && m as usize + beyond < MAX_SCHEDULE_LEN {
        beyond *= 2;
    }
    let len = (m as usize + beyond).min(MAX_SCHEDULE_LEN);
    let u: Vec<f64> = (1..=len).map(|kk| c_tilde * rho.powi((m as i64 - kk as i64).unsigned_abs() as i32)).collect();
    let truncated_tail = c_tilde * rho.powi((len - m as usize) as i32 + 1) / one_minus;
    let base = k * ln_n.powf(1.0 / p);
    let levels = (1..=len).map(|kk| 2.0 * 2f64.powi(kk as i32) * base).collect();
    TruncationSchedule { m, c_tilde, u, levels, truncated_tail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::CompensatedSum;

    fn sub(k: f64, n: f64, c: f64) -> EnvelopeParams {
        EnvelopeParams::new(k, 2.0, n).unwrap().with(C, c).unwrap()
    }

    #[test]
    fn subgaussian_examples() {
        let t = 10.0;
        let v = ln_subgaussian_envelope(&sub(1.0, t * t, 1.0), t).unwrap();
        assert!((v + 100.0 / 3f64.ln()).abs() < 1e-12);
        assert!((v + 91.024).abs() < 1e-3);
        assert_eq!(subgaussian_envelope(&sub(1.0, 100.0, 1.0), 0.0).unwrap(), 1.0);
        assert!((subgaussian_envelope(&sub(1.0, 100.0, 1.0), 1e-9).unwrap() - 1.0).abs() < 1e-15);
        let v = ln_subgaussian_envelope(&sub(2.0, 100.0, 1.0), 10.0).unwrap();
        assert!((v + 100.0 / (4.0 * 6f64.ln())).abs() < 1e-12);
        assert!((v + 13.9528).abs() < 1e-4);
    }

    #[test]
    fn psip_examples() {
        let p = EnvelopeParams::new(1.0, 1.0, 3.0).unwrap().with(C_P, 1.0).unwrap();
        let v = psip_envelope(&p, 1.0).unwrap();
        let raw = 2.0 * (-1.0f64).exp() + 2.0 * (-1.0 / 3f64.ln().powi(2)).exp();
        assert!((raw - 1.609).abs() < 1e-3);
        assert!((v.ln_sum - raw.ln()).abs() < 1e-14);
        assert_eq!(v.value, 1.0);
        assert_eq!(psip_envelope(&p, 100.0).unwrap().dominant, DominantTerm::PsiP);

        let big = EnvelopeParams::new(1.0, 1.0, 100f64.exp()).unwrap().with(C_P, 1.0).unwrap();
        assert_eq!(psip_envelope(&big, 50.0).unwrap().dominant, DominantTerm::Subgaussian);
    }

    #[test]
    fn lower_examples() {
        let p = EnvelopeParams::new(1.0, 1.0, 3.0)
            .unwrap()
            .with(C_TILDE, 1.0)
            .unwrap()
            .with(BIG_C_TILDE, 1.0)
            .unwrap();
        let v = lower_envelope(&p, 1.0, LowerKind::Psip).unwrap();
        let expected = (-1.0 / 3f64.ln().powi(2)).exp().max((-1.0f64).exp());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.43669).abs() < 1e-5);
        let half = p.clone().with(C_TILDE, 0.5).unwrap();
        assert_eq!(lower_envelope(&half, 0.0, LowerKind::Psip).unwrap(), 0.5);

        let t = 7.0;
        let s = EnvelopeParams::new(1.0, 2.0, t * t)
            .unwrap()
            .with(C_TILDE, 1.0)
            .unwrap()
            .with(BIG_C_TILDE, 1.0)
            .unwrap();
        let lo = ln_lower_envelope(&s, t, LowerKind::Subgaussian).unwrap();
        let up = ln_subgaussian_envelope(&sub(1.0, t * t, 1.0), t).unwrap();
        assert_eq!(lo, up);
    }

    #[test]
    fn crossover_examples() {
        let p = EnvelopeParams::new(1.0, 1.0, 10f64.exp()).unwrap();
        let r = regime_crossover(&p).unwrap();
        assert!((r.t_no_conc - 10.0).abs() < 1e-12);
        assert!((r.t_switch - 100.0).abs() < 1e-10);
        let near_two = EnvelopeParams::new(1.0, 2.0 - 1e-6, 10f64.exp()).unwrap();
        let r = regime_crossover(&near_two).unwrap();
        assert!(r.switch_diverges && r.t_switch.is_infinite());
        let scaled = EnvelopeParams::new(3.0, 1.5, 1e4).unwrap();
        let unit = EnvelopeParams::new(1.0, 1.5, 1e4).unwrap();
        let (a, b) = (regime_crossover(&scaled).unwrap(), regime_crossover(&unit).unwrap());
        assert_eq!(a.t_no_conc, 3.0 * b.t_no_conc);
        assert_eq!(a.t_switch, 3.0 * b.t_switch);
        assert!(regime_crossover(&EnvelopeParams::new(1.0, 2.0, 10.0).unwrap()).is_err());
    }

    #[test]
    fn truncation_index() {
        let p = EnvelopeParams::new(1.0, 2.0, 1f64.exp()).unwrap();
        assert_eq!(largest_truncation_index(&p, 16.0).unwrap(), 1);
        assert_eq!(largest_truncation_index(&p, 31.9).unwrap(), 1);
        assert_eq!(largest_truncation_index(&p, 32.0).unwrap(), 2);
        assert!(matches!(largest_truncation_index(&p, 15.9), Err(Error::Hypothesis(_))));
        assert!(truncation_schedule(&p, 16.0).is_err());
    }

    #[test]
    fn schedule_sums_to_half() {
        let s = schedule_for(5, 1.0, 1.0, 1.0);
        let total: CompensatedSum = s.u.iter().copied().collect();
        assert!((total.value() + s.truncated_tail - 0.5).abs() < 1e-14);
        let first_201: f64 = s.u.iter().take(5 + 200).sum();
        assert!((first_201 - 0.5).abs() < 1e-10);

        let s = schedule_for(3, 1.0, 1.0, 1.0);
        assert_eq!(s.u[2], s.c_tilde);
        for k in 3..s.u.len() {
            assert!(s.u[k] < s.u[k - 1]);
        }
        assert!(s.u[1] < s.u[2] && s.u[0] < s.u[1]);
        assert_eq!(s.levels[0], 4.0);

        let near = schedule_for(2, 1.99, 1.0, 1.0);
        assert!(near.truncated_tail < 1e-12);
    }
}
