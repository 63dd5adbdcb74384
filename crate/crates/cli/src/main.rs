use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxdiv::expharness::{emit_table, run_monte_carlo};
use proxdiv::objectives::{Objective, ObjectiveOptions};
use proxdiv::proximal::{check_initialization_with, run};
use proxdiv::{Error, Result};
use serde_json::json;

mod config;

use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "proxdiv", version, about = "Robust minimum-divergence estimation with proximal-point algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the parameter on one sample; prints a JSON record and writes the trace CSV to --output
    Fit(Opts),
    /// Write the iterate trace of one run as CSV
    Trace(Opts),
    /// Monte-Carlo experiment; writes the summary table
    Mc(Opts),
    /// Check the initialization condition at the starting point
    CheckInit(Opts),
}

#[derive(Debug, clap::Args)]
struct Opts {
    /// TOML file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

impl Opts {
    fn resolve(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        Ok(base.overlay(&self.settings))
    }
}

fn output(s: &Settings) -> Result<Box<dyn Write>> {
    Ok(match &s.output {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn objective(s: &Settings) -> Result<Objective> {
    let model = s.model()?;
    let sample = s.sample(&model)?;
    Objective::new(model, s.estimator()?, &sample, &ObjectiveOptions::default())
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}")?;
    Ok(())
}

fn fit(s: &Settings, write_record: bool) -> Result<()> {
    let obj = objective(s)?;
    let model = obj.model();
    let phi0 = s.start(&model)?;
    let trace = run(&obj, &phi0, &s.algorithm()?)?;
    if trace.termination.is_failure() {
        return Err(Error::Optimizer(format!("run failed: {:?}", trace.termination)));
    }
    if write_record {
        if let Some(p) = &s.output {
            let f = File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            trace.write_csv(f)?;
        }
        let est = model.canonicalize(trace.last());
        print_json(&json!({
            "model": model.name(),
            "estimator": obj.estimator().name(),
            "estimate": est,
            "objective": trace.final_value(),
            "iterations": trace.iterations(),
            "termination": trace.termination.code(),
        }))
    } else {
        trace.write_csv(output(s)?)
    }
}

fn mc(s: &Settings) -> Result<()> {
    let summary = run_monte_carlo(&s.experiment()?)?;
    emit_table(&[summary], s.format()?, output(s)?)
}

fn check_init(s: &Settings) -> Result<()> {
    let obj = objective(s)?;
    let c = check_initialization_with(&obj, &s.start(&obj.model())?)?;
    print_json(&json!({
        "condition": c.condition().id(),
        "ok": c.is_ok(),
        "margin": c.margin(),
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(o) => o.resolve().and_then(|s| fit(&s, true)),
        Command::Trace(o) => o.resolve().and_then(|s| fit(&s, false)),
        Command::Mc(o) => o.resolve().and_then(|s| mc(&s)),
        Command::CheckInit(o) => o.resolve().and_then(|s| check_init(&s)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
