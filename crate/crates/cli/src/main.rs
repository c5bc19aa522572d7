//! Command-line front end of the concentration laboratory.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use conclab::binomial::{self, BinomQuery, BinomialGridSpec, FitOptions};
use conclab::convex_distance::{dist_c, parse_point, PointSet};
use conclab::envelopes::{self, EnvelopeParams, LowerKind};
use conclab::extremal::{self, Side, SweepConfig};
use conclab::harness::{
    estimate_tail, exact_tail, run_experiment, ExperimentConfig, FunctionSpec, ProductLaw, Suite,
};
use conclab::measures::ScalarLaw;
use conclab::talagrand;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "conclab", version, about = "Concentration bounds for convex Lipschitz functions of product measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites; exits 1 if any assertion fails.
    Verify {
        #[arg(long = "suite", default_value = "all")]
        suites: Vec<String>,
        #[arg(long, env = "CONCLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "conclab-out")]
        out: PathBuf,
        /// TOML experiment file; `--suite` and `--seed` are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an experiment file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "conclab-out")]
        out: PathBuf,
    },
    /// Monte Carlo (or exact, when available) tail of `f(X) − Med f(X)`.
    McTail {
        /// Coordinate law, e.g. `rademacher` or `two-point:theta=0.1,k=1,p=2`.
        #[arg(long)]
        law: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "euclidean_norm")]
        function: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = SideArg::Upper)]
        side: SideArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, env = "CONCLAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Use the exact path instead of sampling when one exists.
        #[arg(long)]
        exact: bool,
    },
    /// `P{Bin(n, θ) ≥ k}` with its Chernoff bound.
    BinomTail {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        k: u64,
    },
    /// Fit the smallest constant of a lower envelope over a grid.
    Fit {
        #[arg(long, value_enum)]
        inequality: Inequality,
        /// TOML grid spec; defaults are used for omitted keys.
        #[arg(long)]
        grid_spec: Option<PathBuf>,
        /// Per-point CSV report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an envelope at `t`.
    Envelope {
        #[arg(long, value_enum)]
        kind: EnvelopeKind,
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        t: f64,
        /// Small constant (`c`, `c_p` or `c̃`).
        #[arg(long, default_value_t = envelopes::PROOF_TRACED_C)]
        c: f64,
        /// Large constant `C̃` of the lower envelopes.
        #[arg(long = "C", default_value_t = 1.0)]
        big_c: f64,
    },
    /// One-step cost `H` of the inf-convolution argument.
    Hcost {
        #[arg(long, allow_hyphen_values = true)]
        h_t: f64,
        #[arg(long, allow_hyphen_values = true)]
        h_y: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        dt: f64,
        /// Also evaluate the quadratic upper bound with this `q`.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Scale `L` of the exponential moment.
    ChoiceOfL {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "K")]
        k: f64,
    },
    /// Modified convex distance from `x` to a finite set.
    Distc {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// One point per occurrence, e.g. `--point 0,1 --point 1,0`.
        #[arg(long = "point", allow_hyphen_values = true)]
        points: Vec<String>,
        /// File with one whitespace-separated point per line.
        #[arg(long)]
        points_file: Option<PathBuf>,
    },
    /// Exact tails of the extremal two-point construction over a `t` range.
    ExtremalSweep {
        #[arg(long)]
        n: u64,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        c_b: f64,
        /// Defaults to the start of the admissible window.
        #[arg(long)]
        t_min: Option<f64>,
        /// Defaults to the end of the admissible window.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 32)]
        steps: usize,
        #[arg(long, env = "CONCLAB_SEED", default_value_t = 0)]
        seed: u64,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Upper,
    Lower,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Upper => Side::Upper,
            SideArg::Lower => Side::Lower,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Inequality {
    BinomialLower,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvelopeKind {
    Subgaussian,
    Psip,
    LowerSubgaussian,
    LowerPsip,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    let outcome = run_experiment(cfg, out)?;
    for s in &outcome.suites {
        let status = if s.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {:<10} rows={:<6} failures={:<4} {}", s.suite, s.rows, s.failures.len(), s.csv.display());
    }
    println!("failures: {}", outcome.failures_file.display());
    Ok(ExitCode::from(outcome.exit_code() as u8))
}

#[derive(Serialize)]
struct BinomTailReport {
    n: u64,
    theta: f64,
    k: u64,
    tail: f64,
    ln_tail: f64,
    chernoff: f64,
    ln_chernoff: f64,
    median: u64,
}

#[derive(Serialize)]
struct EnvelopeReport {
    value: f64,
    ln_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dominant: Option<envelopes::DominantTerm>,
}

#[derive(Serialize)]
struct HcostReport {
    h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadratic_bound: Option<f64>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify { suites, seed, out, config } => {
            let cfg = match config {
                Some(path) => ExperimentConfig::from_path(&path)?,
                None => {
                    let suites = suites.iter().map(|s| s.parse::<Suite>()).collect::<conclab::Result<Vec<_>>>()?;
                    ExperimentConfig::new(suites, seed)
                }
            };
            verify(&cfg, &out)
        }
        Command::Run { config, out } => verify(&ExperimentConfig::from_path(&config)?, &out),
        Command::McTail { law, n, function, t, side, samples, seed, exact } => {
            let law = ProductLaw::iid(law.parse::<ScalarLaw>()?, n)?;
            let f = function.parse::<FunctionSpec>()?.build(n)?;
            let side = Side::from(side);
            let est = match exact.then(|| exact_tail(&f, &law, t, side)).transpose()?.flatten() {
                Some(e) => e,
                None if exact => bail!("no exact path for {f} under this law"),
                None => estimate_tail(&f, &law, t, side, samples, seed)?,
            };
            print_json(&est)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BinomTail { n, theta, k } => {
            let q = BinomQuery::new(n, theta, k)?;
            let ln_tail = binomial::ln_tail(n, theta, k);
            let ln_chernoff = binomial::ln_chernoff_upper(q);
            print_json(&BinomTailReport {
                n,
                theta,
                k,
                tail: ln_tail.exp(),
                ln_tail,
                chernoff: ln_chernoff.exp(),
                ln_chernoff,
                median: binomial::binom_median(n, theta)?,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { inequality: Inequality::BinomialLower, grid_spec, out } => {
            let spec: BinomialGridSpec = match grid_spec {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str(&text).map_err(|e| conclab::Error::Config(e.to_string()))?
                }
                None => BinomialGridSpec::default(),
            };
            let (fit, points) = binomial::fit_binomial_lower(&spec, &FitOptions::default())?;
            if let Some(path) = out {
                binomial::write_binomial_report(open_out(Some(&path))?, &points, fit.fitted_value)?;
            }
            print_json(&fit)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Envelope { kind, k, p, n, t, c, big_c } => {
            let base = EnvelopeParams::new(k, p, n)?;
            let report = match kind {
                EnvelopeKind::Subgaussian => {
                    let ln = envelopes::ln_subgaussian_envelope(&base.with(envelopes::C, c)?, t)?;
                    EnvelopeReport { value: ln.exp(), ln_value: ln, dominant: None }
                }
                EnvelopeKind::Psip => {
                    let v = envelopes::psip_envelope(&base.with(envelopes::C_P, c)?, t)?;
                    EnvelopeReport { value: v.value, ln_value: v.value.ln(), dominant: Some(v.dominant) }
                }
                EnvelopeKind::LowerSubgaussian | EnvelopeKind::LowerPsip => {
                    let which =
                        if matches!(kind, EnvelopeKind::LowerPsip) { LowerKind::Psip } else { LowerKind::Subgaussian };
                    let params = base.with(envelopes::C_TILDE, c)?.with(envelopes::BIG_C_TILDE, big_c)?;
                    let ln = envelopes::ln_lower_envelope(&params, t, which)?;
                    EnvelopeReport { value: ln.exp(), ln_value: ln, dominant: None }
                }
            };
            print_json(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Hcost { h_t, h_y, kappa, dt, q } => {
            let h = talagrand::h_cost(h_t, h_y, kappa, dt)?;
            let quadratic_bound = q.map(|q| talagrand::remark_bound(h_t, h_y, kappa, dt, q)).transpose()?;
            print_json(&HcostReport { h, quadratic_bound })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ChoiceOfL { n, delta, k } => {
            println!("{}", talagrand::choice_of_l(n, delta, k)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Distc { x, points, points_file } => {
            let x = parse_point(&x)?;
            let set = match points_file {
                Some(path) => PointSet::from_reader(BufReader::new(
                    File::open(&path).with_context(|| format!("opening {}", path.display()))?,
                ))?,
                None => PointSet::new(points.iter().map(|s| parse_point(s)).collect::<conclab::Result<_>>()?)?,
            };
            print_json(&dist_c(&x, &set)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExtremalSweep { n, k, p, c_b, t_min, t_max, steps, seed, out } => {
            let mut cfg = SweepConfig::new(n, k, p, c_b);
            cfg.seed = seed;
            cfg.steps = steps;
            if t_min.is_some() || t_max.is_some() {
                let (lo, hi) = extremal::case_one_window(n, k, p, c_b);
                cfg.t_grid = conclab::numeric::geomspace(t_min.unwrap_or(lo), t_max.unwrap_or(hi), steps);
            }
            let report = extremal::optimality_sweep(&cfg, &FitOptions::default())?;
            extremal::write_sweep_csv(open_out(out.as_deref())?, &report.rows)?;
            eprintln!(
                "fitted C = {:.6} (upper {:.6}, lower {:.6}), c = {:.6}",
                report.fitted_big_c,
                report.upper.fitted_value,
                report.lower.fitted_value,
                1.0 / report.fitted_big_c
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
