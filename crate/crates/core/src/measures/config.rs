//! Text forms of laws: a tagged serde schema and a compact CLI syntax.
//!
//! Serde form (TOML shown):
//!
//! ```toml
//! type = "finite"
//! atoms = [{ value = -1.0, prob = "1/2" }, { value = 1.0, prob = "1/2" }]
//! ```
//!
//! Compact form: `two-point:theta=0.1,alpha=2`, `two-point:theta=0.1,k=1,p=2`,
//! `exp-power:p=1.5,scale=1`, `rademacher`, `point:value=3`,
//! `truncated:p=1,scale=1,level=2`. A string starting with `{` is read as JSON.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{make_exp_power, make_two_point, ScalarLaw};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub value: f64,
    pub prob: String,
}

/// Serialized shape of a [`ScalarLaw`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    TwoPoint { theta: f64, alpha: f64 },
    ExpPower { p: f64, scale: f64 },
    Finite { atoms: Vec<AtomConfig> },
    Truncated { base: Box<LawConfig>, level: f64 },
}

pub(crate) fn parse_ratio(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Config(format!("`{s}` is not a rational of the form num/den"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}

impl TryFrom<LawConfig> for ScalarLaw {
    type Error = Error;

    fn try_from(cfg: LawConfig) -> Result<Self> {
        match cfg {
            LawConfig::TwoPoint { theta, alpha } => ScalarLaw::two_point(theta, alpha),
            LawConfig::ExpPower { p, scale } => make_exp_power(p, scale),
            LawConfig::Finite { atoms } => {
                let atoms = atoms
                    .into_iter()
                    .map(|a| Ok((a.value, parse_ratio(&a.prob)?)))
                    .collect::<Result<Vec<_>>>()?;
                ScalarLaw::finite(atoms)
            }
            LawConfig::Truncated { base, level } => ScalarLaw::try_from(*base)?.truncate(level),
        }
    }
}

impl From<ScalarLaw> for LawConfig {
    fn from(law: ScalarLaw) -> Self {
        match law {
            ScalarLaw::TwoPoint { theta, alpha } => LawConfig::TwoPoint { theta, alpha },
            ScalarLaw::SymmetricExpPower { p, scale } => LawConfig::ExpPower { p, scale },
            ScalarLaw::FiniteDiscrete(fd) => LawConfig::Finite {
                atoms: fd
                    .atoms()
                    .iter()
                    .map(|a| AtomConfig {
                        value: a.value,
                        prob: format!("{}/{}", a.prob.numer(), a.prob.denom()),
                    })
                    .collect(),
            },
            ScalarLaw::Truncated { base, level } => {
                LawConfig::Truncated { base: Box::new(LawConfig::from(*base)), level }
            }
        }
    }
}

impl Serialize for ScalarLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LawConfig::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalarLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cfg = LawConfig::deserialize(d)?;
        ScalarLaw::try_from(cfg).map_err(serde::de::Error::custom)
    }
}

fn field(fields: &[(String, String)], key: &str) -> Result<f64> {
    let (_, v) = fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Config(format!("missing field `{key}`")))?;
    v.parse().map_err(|_| Error::Config(format!("field `{key}`: `{v}` is not a number")))
}

impl FromStr for ScalarLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let cfg: LawConfig =
                serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
            return ScalarLaw::try_from(cfg);
        }
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let fields = rest
            .split(',')
            .filter(|f| !f.trim().is_empty())
            .map(|f| {
                f.split_once('=')
                    .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
                    .ok_or_else(|| Error::Config(format!("expected key=value, got `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let has = |k: &str| fields.iter().any(|(key, _)| key == k);
        match kind.trim().to_ascii_lowercase().as_str() {
            "two-point" | "two_point" if has("alpha") => {
                ScalarLaw::two_point(field(&fields, "theta")?, field(&fields, "alpha")?)
            }
            "two-point" | "two_point" => {
                make_two_point(field(&fields, "theta")?, field(&fields, "k")?, field(&fields, "p")?)
            }
            "exp-power" | "exp_power" => make_exp_power(field(&fields, "p")?, field(&fields, "scale")?),
            "rademacher" => Ok(ScalarLaw::rademacher()),
            "point" | "point-mass" | "point_mass" => ScalarLaw::point_mass(field(&fields, "value")?),
            "truncated" => make_exp_power(field(&fields, "p")?, field(&fields, "scale")?)?
                .truncate(field(&fields, "level")?),
            other => Err(Error::Config(format!("unknown law `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let law = ScalarLaw::finite([
            (-1.0, parse_ratio("1/3").unwrap()),
            (2.5, parse_ratio("2/3").unwrap()),
        ])
        .unwrap();
        let text = toml::to_string(&law).unwrap();
        assert!(text.contains("type = \"finite\""));
        assert!(text.contains("\"2/3\""));
        let back: ScalarLaw = toml::from_str(&text).unwrap();
        assert_eq!(back, law);
    }

    #[test]
    fn json_round_trip_all_variants() {
        let laws = [
            ScalarLaw::two_point(0.1, 2.0).unwrap(),
            make_exp_power(1.5, 0.5).unwrap(),
            make_exp_power(1.0, 1.0).unwrap().truncate(2.0).unwrap(),
            ScalarLaw::rademacher(),
        ];
        for law in laws {
            let text = serde_json::to_string(&law).unwrap();
            let back: ScalarLaw = serde_json::from_str(&text).unwrap();
            assert_eq!(back, law);
            assert_eq!(text.parse::<ScalarLaw>().unwrap(), law);
        }
    }

    #[test]
    fn rejects_invalid() {
        assert!(serde_json::from_str::<ScalarLaw>(r#"{"type":"two_point","theta":1.0,"alpha":1.0}"#).is_err());
        assert!(serde_json::from_str::<ScalarLaw>(r#"{"type":"exp_power","p":1.0,"scale":1.0,"x":1}"#).is_err());
        assert!(serde_json::from_str::<ScalarLaw>(
            r#"{"type":"finite","atoms":[{"value":0.0,"prob":"1/3"}]}"#
        )
        .is_err());
        assert!("bogus".parse::<ScalarLaw>().is_err());
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn compact_syntax() {
        let a: ScalarLaw = "two-point:theta=0.01,k=2,p=1".parse().unwrap();
        match a {
            ScalarLaw::TwoPoint { alpha, .. } => assert!((alpha - 2.0 * 100f64.ln()).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let b: ScalarLaw = "truncated:p=1,scale=1,level=2".parse().unwrap();
        assert!(matches!(b, ScalarLaw::Truncated { .. }));
        assert_eq!("point:value=3".parse::<ScalarLaw>().unwrap(), ScalarLaw::point_mass(3.0).unwrap());
    }
}
