use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adiabatic_swap::cli::{
    check_darkstates, check_scan, check_simulation, darkstates_cmd, exit_code, scan_cmd, simulate_partial,
    write_output, RunConfig,
};
use adiabatic_swap::gateanalysis::physical_estimates;
use adiabatic_swap::{Error, Protocol};

#[derive(Parser)]
#[command(name = "adiabatic-swap", version, about = "Cavity-mediated adiabatic gates on two five-level atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the protocol from the config (swap8, swap7, cnot11).
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Exit with status 4 when the results miss the built-in thresholds.
    #[arg(long = "assert")]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the initial state and the four computational states.
    Simulate(Common),
    /// Gate metrics over a grid of parameters.
    Scan(Common),
    /// Dark-state diagnostics for every step.
    Darkstates(Common),
    /// Dimensionless parameters for helium at a given laser intensity.
    Estimate {
        /// Laser intensity, W/cm^2.
        #[arg(long)]
        intensity: f64,
        /// Pulse width, s.
        #[arg(long)]
        tp: f64,
    },
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = c.protocol {
        cfg.protocol = p;
    }
    Ok(cfg)
}

fn finish(violations: Vec<String>, check: bool) -> ExitCode {
    if check && !violations.is_empty() {
        for v in violations {
            eprintln!("assertion failed: {v}");
        }
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}

fn simulate(c: &Common) -> Result<ExitCode, Error> {
    let cfg = load(c)?;
    let (out, failure) = simulate_partial(&cfg)?;
    if let Some((e, partial)) = failure {
        let path = write_output(&c.out, &cfg.output.trajectory, &partial)?;
        eprintln!("partial trajectory written to {}", path.display());
        return Err(e);
    }
    let out = out.expect("complete run");
    for f in &out.report.diagnostics.flags {
        eprintln!("warning: {}", serde_json::to_string(f)?);
    }
    write_output(&c.out, &cfg.output.trajectory, &out.csv)?;
    write_output(&c.out, &cfg.output.report, &serde_json::to_string_pretty(&out.report)?)?;
    println!("{} fidelity {:.6}", out.report.gate.target, out.report.gate.fidelity);
    Ok(finish(check_simulation(&out.report), c.check))
}

fn scan(c: &Common) -> Result<ExitCode, Error> {
    let cfg = load(c)?;
    let csv = scan_cmd(&cfg)?;
    let path = write_output(&c.out, &cfg.output.scan, &csv)?;
    println!("{} rows written to {}", csv.lines().count() - 1, path.display());
    Ok(finish(check_scan(&csv), c.check))
}

fn darkstates(c: &Common) -> Result<ExitCode, Error> {
    let cfg = load(c)?;
    let report = darkstates_cmd(&cfg)?;
    let path = write_output(&c.out, &cfg.output.darkstates, &serde_json::to_string_pretty(&report)?)?;
    println!("{} steps written to {}", report.steps.len(), path.display());
    Ok(finish(check_darkstates(&report), c.check))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Scan(c) => scan(&c),
        Command::Darkstates(c) => darkstates(&c),
        Command::Estimate { intensity, tp } => {
            let e = physical_estimates(intensity, tp)?;
            println!("{}", serde_json::to_string_pretty(&e)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
