//! Config-driven runs of the named suites.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::audit::{verify_upper_envelopes, AuditConfig};
use super::derive_seed;
use super::suites::{
    binomial_suite, distance_suite, expmoment_suite, extremal_suite, minbasic_suite, BinomialSuite, DistanceSuite,
    ExpMomentSuite, ExtremalSuite, MinBasicSuite, SuiteResult,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Binomial,
    Minbasic,
    Distance,
    Expmoment,
    Extremal,
    Envelopes,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Binomial, Suite::Minbasic, Suite::Distance, Suite::Expmoment, Suite::Extremal, Suite::Envelopes];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Binomial => "binomial",
            Suite::Minbasic => "minbasic",
            Suite::Distance => "distance",
            Suite::Expmoment => "expmoment",
            Suite::Extremal => "extremal",
            Suite::Envelopes => "envelopes",
            Suite::All => "all",
        }
    }

    fn index(self) -> u64 {
        Suite::EACH.iter().position(|&s| s == self).unwrap_or(Suite::EACH.len()) as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain([Suite::All].iter())
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// A machine-readable assertion failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub suite: String,
    pub case: String,
    pub expected: String,
    pub got: String,
}

/// Top-level experiment file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub binomial: BinomialSuite,
    #[serde(default)]
    pub minbasic: MinBasicSuite,
    #[serde(default)]
    pub distance: DistanceSuite,
    #[serde(default)]
    pub expmoment: ExpMomentSuite,
    #[serde(default)]
    pub extremal: ExtremalSuite,
    /// Defaults to the standard audit with 20 000 samples per cell.
    #[serde(default)]
    pub envelopes: Option<AuditConfig>,
}

/// Samples per cell of the default envelope audit.
pub const DEFAULT_AUDIT_SAMPLES: usize = 20_000;

impl ExperimentConfig {
    pub fn new(suites: Vec<Suite>, seed: u64) -> Self {
        Self {
            seed,
            suites,
            binomial: BinomialSuite::default(),
            minbasic: MinBasicSuite::default(),
            distance: DistanceSuite::default(),
            expmoment: ExpMomentSuite::default(),
            extremal: ExtremalSuite::default(),
            envelopes: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Suites to run, with `all` expanded and duplicates removed.
    pub fn expanded_suites(&self) -> Vec<Suite> {
        let mut out: Vec<Suite> = Vec::new();
        for &s in &self.suites {
            let list: &[Suite] = if s == Suite::All { &Suite::EACH } else { std::slice::from_ref(&s) };
            for &x in list {
                if !out.contains(&x) {
                    out.push(x);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub csv: PathBuf,
    pub rows: usize,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub suites: Vec<SuiteOutcome>,
    pub failures_file: PathBuf,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.failures.is_empty())
    }

    /// `0` when every assertion holds, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn finish<R: Serialize>(suite: Suite, dir: &Path, res: SuiteResult<R>) -> Result<SuiteOutcome> {
    let csv = dir.join(format!("{}.csv", suite.name()));
    write_rows(&csv, &res.rows)?;
    Ok(SuiteOutcome { suite, csv, rows: res.rows.len(), failures: res.failures })
}

/// Runs the configured suites, writing `<suite>.csv` and `failures.jsonl`
/// (one JSON record per failed assertion) into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut suites = Vec::new();
    for suite in cfg.expanded_suites() {
        let seed = derive_seed(cfg.seed, suite.index());
        let outcome = match suite {
            Suite::Binomial => finish(suite, out_dir, binomial_suite(&cfg.binomial, seed)?)?,
            Suite::Minbasic => finish(suite, out_dir, minbasic_suite(&cfg.minbasic, seed)?)?,
            Suite::Distance => finish(suite, out_dir, distance_suite(&cfg.distance, seed)?)?,
            Suite::Expmoment => finish(suite, out_dir, expmoment_suite(&cfg.expmoment, seed)?)?,
            Suite::Extremal => finish(suite, out_dir, extremal_suite(&cfg.extremal, seed)?)?,
            Suite::Envelopes => {
                let audit_cfg = match &cfg.envelopes {
                    Some(c) => AuditConfig { seed: derive_seed(c.seed, seed), ..c.clone() },
                    None => AuditConfig::standard(DEFAULT_AUDIT_SAMPLES, seed)?,
                };
                let audit = verify_upper_envelopes(&audit_cfg)?;
                let failures = audit
                    .violations
                    .iter()
                    .map(|v| Failure {
                        suite: suite.name().into(),
                        case: v.clone(),
                        expected: "upper CI endpoint <= envelope".into(),
                        got: "above".into(),
                    })
                    .collect();
                finish(suite, out_dir, SuiteResult { rows: audit.rows, failures })?
            }
            Suite::All => unreachable!("expanded above"),
        };
        suites.push(outcome);
    }
    let failures_file = out_dir.join("failures.jsonl");
    let mut w = BufWriter::new(File::create(&failures_file)?);
    for f in suites.iter().flat_map(|s| &s.failures) {
        serde_json::to_writer(&mut w, f).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(ExperimentOutcome { suites, failures_file })
}

/// [`run_experiment`] on a TOML file.
pub fn run_experiment_file(config_path: &Path, out_dir: &Path) -> Result<ExperimentOutcome> {
    run_experiment(&ExperimentConfig::from_path(config_path)?, out_dir)
}
