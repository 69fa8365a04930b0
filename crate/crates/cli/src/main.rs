use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alphaes_cli::{
    cmd_landscape, cmd_oracle_compare, cmd_run, cmd_sample_study, commands::sanity_warnings,
    objectives_listing, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "alphaes",
    about = "Bayesian-optimization experiments with alpha-divergence entropy-search acquisitions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's worker count (0 = machine default).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run repetitions of a BO experiment and aggregate regret curves.
    Run(CommonArgs),
    /// Repeat an experiment across the configured list of sample counts S.
    SampleStudy(CommonArgs),
    /// Count acquisition local maxima over landscape repetitions.
    Landscape(CommonArgs),
    /// Compare the acquisition approximation against the brute-force oracle.
    OracleCompare(CommonArgs),
    /// Print the objective registry.
    ListObjectives,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (args, runner): (&CommonArgs, fn(&ExperimentConfig) -> anyhow::Result<usize>) = match &cli.command {
        Command::ListObjectives => {
            print!("{}", objectives_listing());
            return ExitCode::SUCCESS;
        }
        Command::Run(args) => (args, |cfg| Ok(cmd_run(cfg)?.failed_runs)),
        Command::SampleStudy(args) => (args, |cfg| Ok(cmd_sample_study(cfg)?.failed_runs)),
        Command::Landscape(args) => (args, |cfg| {
            cmd_landscape(cfg)?;
            Ok(0)
        }),
        Command::OracleCompare(args) => (args, |cfg| {
            cmd_oracle_compare(cfg)?;
            Ok(0)
        }),
    };

    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("config error: {message}");
            return ExitCode::from(2);
        }
    };
    sanity_warnings(&cfg);

    match runner(&cfg) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} run(s) failed; partial artifacts are flagged in the manifest");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
