//! `ndfem`: meshing, forward simulation, dataset generation, training,
//! evaluation, analysis and property checks from the command line.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use commands::analyze::{ExportArgs, SinkhornArgs, StretchArgs};
use commands::data::{DatasetMakeArgs, MeshGenArgs, SimulateArgs};
use commands::evaluate::EvaluateArgs;
use commands::train::TrainArgs;
use commands::verify::VerifyArgs;
use config::ConfigFile;
use error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "ndfem", version, about = "Hyperelastic model discovery from displacement and reaction data")]
struct Cli {
    /// Worker threads; 1 and N give identical numbers.
    #[arg(long, global = true, env = "NDFEM_THREADS")]
    threads: Option<usize>,
    /// TOML file with one table per subcommand; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh generation.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Solve every experiment of a setup with an analytic law.
    Simulate(SimulateArgs),
    /// Observation datasets from simulated equilibria.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Fit a strain energy to a dataset.
    Train(TrainArgs),
    /// Compare a trained model against the ground truth on a test setup.
    Evaluate(EvaluateArgs),
    /// Stretch clouds, Sinkhorn divergences and plot data.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Numerical property suites.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Subcommand)]
enum MeshCommand {
    /// Mesh the specimen of a setup.
    Gen(MeshGenArgs),
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Masked, noisy observations of a simulation.
    Make(DatasetMakeArgs),
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Principal stretches of simulated states.
    Stretches(StretchArgs),
    /// Divergences between stretch clouds.
    Sinkhorn(SinkhornArgs),
    /// CSV and SVG plot data from evaluation artifacts.
    Export(ExportArgs),
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Run a property suite; exits 5 when a required check fails.
    Properties(VerifyArgs),
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("NDFEM_LOG")
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::config("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    init_threads(cli.threads.or(cfg.threads()?))?;
    match &cli.command {
        Command::Mesh(MeshCommand::Gen(a)) => commands::data::mesh_gen(&cfg, a),
        Command::Simulate(a) => commands::data::simulate(&cfg, a),
        Command::Dataset(DatasetCommand::Make(a)) => commands::data::dataset_make(&cfg, a),
        Command::Train(a) => commands::train::train(&cfg, a),
        Command::Evaluate(a) => commands::evaluate::evaluate(&cfg, a),
        Command::Analyze(AnalyzeCommand::Stretches(a)) => commands::analyze::stretches(&cfg, a),
        Command::Analyze(AnalyzeCommand::Sinkhorn(a)) => commands::analyze::sinkhorn(&cfg, a),
        Command::Analyze(AnalyzeCommand::Export(a)) => commands::analyze::export(&cfg, a),
        Command::Verify(VerifyCommand::Properties(a)) => commands::verify::properties(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if !usage {
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", CliError::config(e.kind().to_string()).report());
            return ExitCode::from(error::Category::Config.code());
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommands_parse() {
        let c = Cli::try_parse_from(["ndfem", "--threads", "2", "verify", "properties", "--suite", "fem", "--quick"]).unwrap();
        assert_eq!(c.threads, Some(2));
        match c.command {
            Command::Verify(VerifyCommand::Properties(a)) => {
                assert_eq!(a.suite.as_deref(), Some("fem"));
                assert_eq!(a.quick, Some(true));
            }
            other => panic!("{other:?}"),
        }
        let c = Cli::try_parse_from(["ndfem", "analyze", "stretches", "--run", "a", "--run", "b"]).unwrap();
        match c.command {
            Command::Analyze(AnalyzeCommand::Stretches(a)) => assert_eq!(a.run.unwrap().len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["ndfem", "train", "--bogus"]).is_err());
    }
}
