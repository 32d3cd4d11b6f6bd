//! Command-line parsing and run-spec resolution.
//!
//! Values come from, in decreasing priority: command-line flags, the
//! `key=value` config file named by `--config`, the `QTLPOWER_SEED`
//! environment variable (seed only), and built-in defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adjustments::Method;
use crate::error::{Error, Result};
use crate::power_engine::{EstimatorParams, GridSpec};
use crate::trait_sim::{Family, StudyConfig};

pub const SEED_ENV: &str = "QTLPOWER_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "qtlpower",
    version,
    about = "Power of single-marker QTL tests under treatment censoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate power over a (delta-prime, p, d) grid.
    Power(PowerArgs),
    /// Dump one simulated dataset as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo check of the medicine-effect estimator.
    VerifyEstimator(EstimatorArgs),
    /// Run the special-function and oracle fixture checks.
    Selfcheck,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PowerArgs {
    /// Flat key=value file with defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated minor-allele frequencies.
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated genotype mean spacings (mm Hg).
    #[arg(long)]
    pub d: Option<String>,
    /// Comma-separated normalized LD values; fractions such as 1/3 are accepted.
    #[arg(long = "delta-prime")]
    pub delta_prime: Option<String>,
    /// normal or lognormal.
    #[arg(long)]
    pub family: Option<String>,
    /// Comma-separated subset of: underlying, observed, omit-affected, omit-treated, covariate, constant, levy.
    #[arg(long, alias = "method")]
    pub methods: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    /// Output path; with --format both, .csv and .md files are written next to it.
    #[arg(long)]
    pub out: Option<String>,
    /// csv, markdown or both.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 10.0)]
    pub d: f64,
    #[arg(long = "delta-prime", default_value = "1")]
    pub delta_prime: String,
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicate index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 120.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 20.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 140.0)]
    pub threshold: f64,
    #[arg(long = "treat-prob", default_value_t = 0.8)]
    pub treat_prob: f64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 3.0)]
    pub tau: f64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Both,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Parse(format!(
                "unknown format '{other}' (expected csv, markdown or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub grid: GridSpec,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunSpec {
    /// Files to write for the chosen format, or `None` for stdout.
    pub fn output_paths(&self) -> Option<(Option<PathBuf>, Option<PathBuf>)> {
        let out = self.out.as_ref()?;
        Some(match self.format {
            OutputFormat::Csv => (Some(out.clone()), None),
            OutputFormat::Markdown => (None, Some(out.clone())),
            OutputFormat::Both => (
                Some(out.with_extension("csv")),
                Some(out.with_extension("md")),
            ),
        })
    }
}

const CONFIG_KEYS: [&str; 12] = [
    "p",
    "d",
    "delta-prime",
    "family",
    "methods",
    "reps",
    "n",
    "alpha",
    "seed",
    "workers",
    "out",
    "format",
];

/// Parses a flat `key=value` config file. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let key = if key == "method" {
            "methods".to_string()
        } else {
            key
        };
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!(
                "config line {}: unknown key '{key}'",
                i + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Parses a number or a fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
            if b == 0.0 {
                return Err(Error::Parse(format!("zero denominator in '{s}'")));
            }
            a / b
        }
        None => s
            .parse()
            .map_err(|_| Error::Parse(format!("bad number '{s}'")))?,
    };
    if !value.is_finite() {
        return Err(Error::Parse(format!("non-finite number '{s}'")));
    }
    Ok(value)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let list = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_number)
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(Error::Parse(format!("empty list '{s}'")));
    }
    Ok(list)
}

fn parse_int<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("--{key}: expected an integer, got '{s}'")))
}

/// Resolves `power` flags, an optional config file body and the seed env value.
pub fn parse_run_spec(
    args: &PowerArgs,
    config_text: Option<&str>,
    env_seed: Option<&str>,
) -> Result<RunSpec> {
    let file = match config_text {
        Some(t) => parse_config_text(t)?,
        None => HashMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).cloned())
    };

    let family = match pick(&args.family, "family") {
        Some(f) => Family::parse(f.trim())?,
        None => Family::Normal,
    };
    let mut grid = GridSpec::standard(family);
    if let Some(v) = pick(&args.p, "p") {
        grid.ps = parse_list(&v)?;
    }
    if let Some(v) = pick(&args.d, "d") {
        grid.ds = parse_list(&v)?;
    }
    if let Some(v) = pick(&args.delta_prime, "delta-prime") {
        grid.delta_primes = parse_list(&v)?;
    }
    if let Some(v) = pick(&args.methods, "methods") {
        let mut methods = Vec::new();
        for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = Method::from_cli(name, family)?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        if methods.is_empty() {
            return Err(Error::Parse("--methods: no method given".into()));
        }
        methods.sort_by_key(|m| m.order());
        grid.methods = methods;
    }

    let base = &mut grid.base;
    if let Some(v) = pick(&args.reps, "reps") {
        base.n_replicates = parse_int("reps", &v)?;
    }
    if let Some(v) = pick(&args.n, "n") {
        base.n_subjects = parse_int("n", &v)?;
    }
    if let Some(v) = pick(&args.alpha, "alpha") {
        base.alpha = parse_number(&v)?;
    }
    base.master_seed = match pick(&args.seed, "seed").or_else(|| env_seed.map(str::to_string)) {
        Some(v) => parse_int("seed", &v)?,
        None => 0,
    };
    if base.n_replicates == 0 {
        return Err(Error::Config("--reps must be positive".into()));
    }

    let workers = match pick(&args.workers, "workers") {
        Some(v) => {
            let w: usize = parse_int("workers", &v)?;
            if w == 0 {
                return Err(Error::Config("--workers must be positive".into()));
            }
            Some(w)
        }
        None => None,
    };
    let format = match pick(&args.format, "format") {
        Some(f) => OutputFormat::parse(f.trim())?,
        None => OutputFormat::Csv,
    };
    let out = pick(&args.out, "out").map(PathBuf::from);

    for cfg in grid.cells() {
        cfg.validate()?;
    }
    Ok(RunSpec {
        grid,
        workers,
        out,
        format,
    })
}

pub fn read_config_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))
}

impl SimulateArgs {
    pub fn study_config(&self, env_seed: Option<&str>) -> Result<StudyConfig> {
        let master_seed = match (self.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_int("seed", v)?,
            (None, None) => 0,
        };
        let cfg = StudyConfig {
            p: self.p,
            d: self.d,
            delta_prime: parse_number(&self.delta_prime)?,
            family: Family::parse(&self.family)?,
            n_subjects: self.n,
            master_seed,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EstimatorArgs {
    pub fn params(&self, env_seed: Option<&str>) -> Result<EstimatorParams> {
        let seed = match (self.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_int("seed", v)?,
            (None, None) => 0,
        };
        Ok(EstimatorParams {
            n: self.n,
            mu: self.mu,
            sigma: self.sigma,
            threshold: self.threshold,
            treat_prob: self.treat_prob,
            nu: self.nu,
            tau: self.tau,
            replicates: self.reps,
            seed,
        })
    }
}
