//! `carleman` batch front end.

mod artifacts;
mod config;
mod experiment;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

#[derive(Parser)]
#[command(name = "carleman", version, about = "Carleman kinetic system and its diffusive limit: runs, certificates, diagnostics")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print the resolved end time and schedule.
    Validate,
    /// Run the ε sweep, the limit run and all enabled diagnostics.
    Run,
    /// Certify the configured barriers without running the solvers.
    CertifyBarriers,
    /// Print the verdicts of a finished run; fails when any verdict failed.
    Report,
    /// Write SVG plots for a finished run.
    Plot,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Solver(String),
    Diagnostic(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) | Failure::Io(_) => 3,
            Failure::Diagnostic(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(issues) => write!(f, "invalid configuration:\n  {}", issues.join("\n  ")),
            Failure::Solver(m) => write!(f, "solver error: {m}"),
            Failure::Diagnostic(m) => write!(f, "diagnostic failure: {m}"),
            Failure::Io(m) => write!(f, "cannot write artifacts: {m}"),
        }
    }
}

fn load(cli: &Cli) -> Result<config::Experiment, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config(vec!["--config is required".into()]))?;
    let strings = |v: Vec<config::Issue>| Failure::Config(v.iter().map(ToString::to_string).collect());
    let mut raw = config::load(path).map_err(strings)?;
    if let Some(seed) = cli.seed {
        raw.seed = seed;
    }
    config::validate(raw).map_err(strings)
}

fn out_dir(cli: &Cli, exp: Option<&config::Experiment>) -> Result<PathBuf, Failure> {
    cli.out
        .clone()
        .or_else(|| exp.and_then(|e| e.config.output.clone()).map(PathBuf::from))
        .ok_or_else(|| Failure::Config(vec!["--out is required".into()]))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(vec![format!("--threads: {e}")]))?;
    }
    match cli.command {
        Command::Validate => {
            let exp = load(cli)?;
            println!("configuration ok: n = {}, alpha = {}, {} epsilon values", exp.config.model.n, exp.config.model.alpha, exp.params.len());
            println!("t_end = {}", exp.t_end);
            println!("snapshots = {:?}", exp.schedule);
            for w in &exp.warnings {
                println!("warning: {w}");
            }
            Ok(())
        }
        Command::Run | Command::CertifyBarriers => {
            let exp = load(cli)?;
            let out = out_dir(cli, Some(&exp))?;
            let certify_only = matches!(cli.command, Command::CertifyBarriers) || exp.config.certify_only;
            if certify_only && exp.lower.is_none() && exp.upper.is_none() {
                return Err(Failure::Config(vec!["barriers: nothing to certify".into()]));
            }
            let outcome = experiment::run(&exp, &out, exp.config.seed, certify_only)?;
            println!("wrote {} files to {}", outcome.files, out.display());
            report::check(&outcome.report)
        }
        Command::Report => {
            let out = out_dir(cli, None)?;
            let r = report::load(&out)?;
            report::print(&r);
            report::check(&r)
        }
        Command::Plot => {
            let out = out_dir(cli, None)?;
            let written = plot::emit(&out)?;
            println!("wrote {written} plot files");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{f}");
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
