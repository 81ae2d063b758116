use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teflow::pipeline::{run_pipeline, RunOptions, Stage};
use teflow::{Error, RunConfig};

/// Build transfer-entropy flow networks from an investor-flow panel and
/// evaluate their information content.
#[derive(Debug, Parser)]
#[command(name = "teflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Input panel CSV (overrides `input` in the configuration).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Global seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Outputs do not depend on this.
    #[arg(long, short, default_value_t = 1, global = true)]
    jobs: usize,

    /// Run a single stage against an existing output directory:
    /// synth, ingest, te-network, higher-order, bounds, cross-section,
    /// robustness or report.
    #[arg(long, value_parser = parse_stage)]
    stage: Option<Stage>,

    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,

    /// Increase log verbosity (repeatable).
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

/// Without a subcommand every stage runs in order.
#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run every stage.
    Run,
    /// Generate the configured synthetic panel and its ground truth.
    Synth,
    /// Load, validate and normalize the input panel.
    Ingest,
    /// Surrogate-tested TE networks, centralities, lag profile, rolling density.
    TeNetwork,
    /// Interaction information and directionality.
    HigherOrder,
    /// Mutual information, Kelly and Fano bounds.
    Bounds,
    /// Fama-MacBeth regressions, quintile sorts, portfolio comparison.
    CrossSection,
    /// Subperiod, size, method and threshold robustness tables.
    Robustness,
    /// Plot-data files from an existing run.
    Report,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        match self {
            Command::Run => None,
            Command::Synth => Some(Stage::Synth),
            Command::Ingest => Some(Stage::Ingest),
            Command::TeNetwork => Some(Stage::TeNetwork),
            Command::HigherOrder => Some(Stage::HigherOrder),
            Command::Bounds => Some(Stage::Bounds),
            Command::CrossSection => Some(Stage::CrossSection),
            Command::Robustness => Some(Stage::Robustness),
            Command::Report => Some(Stage::Report),
        }
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_STAGE: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Toml(_) | Error::MissingColumn { .. } => EXIT_CONFIG,
        Error::Stage { stage, .. } => match err.root() {
            Error::Config(_) | Error::MissingColumn { .. } => EXIT_CONFIG,
            Error::Row { .. } | Error::InvalidRows(_) | Error::Integrity { .. } | Error::Csv(_) | Error::Io(_)
                if stage == "ingest" =>
            {
                EXIT_DATA
            }
            _ => EXIT_STAGE,
        },
        _ => EXIT_STAGE,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(input) = &cli.input {
        cfg.input = Some(input.clone());
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    cfg.validate()?;
    let stage = match (cli.command.and_then(Command::stage), cli.stage) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!("subcommand `{a}` conflicts with --stage {b}")));
        }
        (a, b) => a.or(b),
    };
    let summary = run_pipeline(&cfg, &RunOptions { jobs: cli.jobs, stage })?;
    log::info!(
        "completed {} stage(s); {} files in {}",
        summary.manifest.stages_completed.len(),
        summary.manifest.files.len(),
        summary.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
