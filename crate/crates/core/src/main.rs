use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;

use qtlpower::cli::{self, Cli, Command, OutputFormat, RunSpec};
use qtlpower::power_engine::{replicate_rng, run_grid, verify_estimator, with_workers};
use qtlpower::report;
use qtlpower::selfcheck;
use qtlpower::trait_sim::Simulator;
use qtlpower::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let env_seed = std::env::var(cli::SEED_ENV).ok();
    let outcome = match cli.command {
        Command::Power(args) => run_power(&args, env_seed.as_deref()),
        Command::Simulate(args) => run_simulate(&args, env_seed.as_deref()),
        Command::VerifyEstimator(args) => run_verify(&args, env_seed.as_deref()),
        Command::Selfcheck => run_selfcheck(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Config(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::from(EXIT_RUNTIME),
            }
        }
    }
}

fn run_power(args: &cli::PowerArgs, env_seed: Option<&str>) -> qtlpower::Result<ExitCode> {
    let config_text = match &args.config {
        Some(path) => Some(cli::read_config_file(path)?),
        None => None,
    };
    let spec: RunSpec = cli::parse_run_spec(args, config_text.as_deref(), env_seed)?;
    let table = with_workers(spec.workers, || run_grid(&spec.grid))??;

    match spec.output_paths() {
        Some((csv, md)) => {
            if let Some(path) = csv {
                report::emit_csv(&table, &path)?;
            }
            if let Some(path) = md {
                report::emit_markdown(&table, &path)?;
            }
        }
        None => {
            let mut out = io::stdout().lock();
            match spec.format {
                OutputFormat::Csv => report::write_csv(&table, &mut out)?,
                OutputFormat::Markdown => report::write_markdown(&table, &mut out)?,
                OutputFormat::Both => {
                    report::write_csv(&table, &mut out)?;
                    writeln!(out)?;
                    report::write_markdown(&table, &mut out)?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(args: &cli::SimulateArgs, env_seed: Option<&str>) -> qtlpower::Result<ExitCode> {
    let config = args.study_config(env_seed)?;
    let sim = Simulator::new(&config)?;
    let mut rng = replicate_rng(config.master_seed, 0, args.replicate);
    let ds = sim.dataset(args.replicate as usize, &mut rng);
    match &args.out {
        Some(path) => {
            let mut file = io::BufWriter::new(std::fs::File::create(path)?);
            ds.write_csv(&mut file)?;
            file.flush()?;
        }
        None => ds.write_csv(io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: &cli::EstimatorArgs, env_seed: Option<&str>) -> qtlpower::Result<ExitCode> {
    let params = args.params(env_seed)?;
    let report = with_workers(args.workers, || verify_estimator(&params))??;
    print!("{}", report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn run_selfcheck() -> qtlpower::Result<ExitCode> {
    let checks = selfcheck::all_checks();
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} ({})", c.name, c.detail);
        failed += (!c.passed) as usize;
    }
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    })
}
