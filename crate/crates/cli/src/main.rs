//! `overreact` command-line front end.
//!
//! Exit codes: 0 success, 1 verification or computation failure, 2 usage or
//! validation error.

mod config;
mod jobs;
mod manifest;

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use overreact::{validate, Axis, Bias, Fault, SimConfig, SuiteConfig};

use config::{flag_or_config, ModelFlags};
use jobs::{Figure, Job, JobOutput};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "overreact", version, about = "Diagnostic-expectations market equilibrium and welfare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Output {
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Write output files and a run manifest into DIR.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium, price moments and welfare loss.
    Solve {
        #[command(flatten)]
        model: ModelFlags,
        /// Read the inputs echoed by `solve --json` from PATH or `-` (stdin).
        #[arg(long, value_name = "PATH")]
        from_json: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Equilibrium quantities along a grid in theta or delta.
    Sweep {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, default_value = "theta")]
        axis: Axis,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        /// Grid size (default 101).
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Externality balance, bias thresholds and threshold taxes.
    Threshold {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        output: Output,
    },
    /// Welfare-optimal bias and taxes.
    Optimize {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        output: Output,
    },
    /// Figure CSVs from the hard-coded presets.
    Figure {
        name: Figure,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Monte Carlo oracle suite.
    Verify {
        /// 2000 agents and 10^4 replications per draw.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
        #[command(flatten)]
        output: Output,
    },
    /// Finite-agent simulation of one economy.
    Simulate {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        n_agents: Option<usize>,
        #[arg(long)]
        n_reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        antithetic: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Re-run a manifest and compare output digests.
    Replay {
        manifest: PathBuf,
        /// Also write the regenerated files into DIR.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    Usage(format!("{e:#}")).into()
}

fn resolve(flags: &ModelFlags) -> Result<config::Model> {
    let m = flags.resolve().map_err(usage)?;
    check(&m)?;
    Ok(m)
}

fn check(m: &config::Model) -> Result<()> {
    let report = validate(&m.params, &Bias::new(m.theta), &m.tax);
    if report.is_ok() {
        Ok(())
    } else {
        Err(Usage(report.to_string()).into())
    }
}

fn read_model_json(src: &str) -> Result<config::Model> {
    let text = if src == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(src).with_context(|| format!("reading {src}"))?
    };
    let v: serde_json::Value = serde_json::from_str(&text).context("parsing JSON input")?;
    let m = jobs::model_from_json(&v).map_err(usage)?;
    check(&m)?;
    Ok(m)
}

fn emit(job: &Job, out: &JobOutput, output: &Output) -> Result<()> {
    match &output.out {
        Some(dir) => {
            for path in manifest::write_outputs(dir, job, &out.files)? {
                println!("wrote {}", path.display());
            }
        }
        None if output.json => println!("{}", serde_json::to_string_pretty(&out.json)?),
        None => print!("{}", out.text),
    }
    Ok(())
}

fn execute(job: Job, output: &Output) -> Result<bool> {
    let out = jobs::run(&job)?;
    if !out.ok && output.out.is_some() {
        // the per-check report is still useful when files go to disk
        eprint!("{}", out.text);
    }
    emit(&job, &out, output)?;
    Ok(out.ok)
}

fn replay(path: &Path, out: Option<&Path>) -> Result<bool> {
    let m = RunManifest::load(path).map_err(usage)?;
    let result = jobs::run(&m.job)?;
    let checks = manifest::compare(&m, &result.files)?;
    for c in &checks {
        println!("{:<24} {}", c.file, if c.identical { "identical" } else { "differs" });
    }
    if let Some(dir) = out {
        manifest::write_outputs(dir, &m.job, &result.files)?;
    }
    Ok(checks.iter().all(|c| c.identical))
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Solve { model, from_json, output } => {
            let model = match from_json {
                Some(src) => read_model_json(&src)?,
                None => resolve(&model)?,
            };
            execute(Job::Solve { model }, &output)
        }
        Command::Sweep { model: flags, axis, from, to, points, output } => {
            let model = resolve(&flags)?;
            let cfg = flags.config().map_err(usage)?;
            let points = flag_or_config(points, &cfg, "points", 101).map_err(usage)?;
            let (lo, hi) = match axis {
                Axis::Theta => (-0.5, 1.0),
                Axis::Delta => (0.0, 0.5),
            };
            let (from, to) = (from.unwrap_or(lo), to.unwrap_or(hi));
            if points < 2 {
                return Err(Usage("--points must be at least 2".into()).into());
            }
            execute(Job::Sweep { model, axis, from, to, points }, &output)
        }
        Command::Threshold { model, output } => execute(Job::Threshold { model: resolve(&model)? }, &output),
        Command::Optimize { model, output } => execute(Job::Optimize { model: resolve(&model)? }, &output),
        Command::Figure { name, points, out } => {
            let points = points.unwrap_or(name.default_points());
            if points < 2 {
                return Err(Usage("--points must be at least 2".into()).into());
            }
            let job = Job::Figure {
                figure: name,
                points,
                cases: name.cases(),
                settings: Default::default(),
            };
            let output = Output {
                json: false,
                out: Some(out),
            };
            execute(job, &output)
        }
        Command::Verify { quick, draws, seed, inject_fault, output } => {
            let mut suite = if quick { SuiteConfig::quick() } else { SuiteConfig::default() };
            if let Some(d) = draws {
                suite.draws = d;
            }
            if let Some(s) = seed {
                suite.seed = s;
            }
            suite.fault = inject_fault;
            execute(Job::Verify { suite }, &output)
        }
        Command::Simulate { model: flags, n_agents, n_reps, seed, antithetic, output } => {
            let model = resolve(&flags)?;
            let cfg = flags.config().map_err(usage)?;
            let d = SimConfig::default();
            let sim = SimConfig {
                n_agents: n_agents.unwrap_or(d.n_agents),
                n_reps: n_reps.unwrap_or(d.n_reps),
                seed: flag_or_config(seed, &cfg, "seed", d.seed).map_err(usage)?,
                antithetic,
            };
            execute(Job::Simulate { model, sim }, &output)
        }
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<overreact::Error>(), Some(overreact::Error::Invalid(_)));
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
