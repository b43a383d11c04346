//! `ccbm`: synthesize Cauchy data, locate contact regions by topological
//! gradient, map them statistically, and refine them by shape descent.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ScenarioConfig;
pub use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "ccbm", version, about = "Contact-region identification from boundary Cauchy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML). Defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `noise.seed`.
    #[arg(long, global = true, env = "CCBM_SEED")]
    seed: Option<u64>,

    /// Overrides `output.dir`.
    #[arg(long, global = true, env = "CCBM_OUT")]
    out: Option<PathBuf>,

    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also write SVG renderings.
    #[arg(long, global = true)]
    render: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthesize Cauchy data from the configured truth.
    Forward,
    /// One-shot topological detection.
    Topo,
    /// Monte-Carlo confidence map.
    Stat,
    /// Shape refinement of an initial region.
    Shape,
    /// Every stage, chained.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Topo => "topo",
            Command::Stat => "stat",
            Command::Shape => "shape",
            Command::All => "all",
        }
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let mut cfg =
                ScenarioConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            // input paths are relative to the config file
            let base = std::path::absolute(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                .parent()
                .map(PathBuf::from)
                .unwrap_or_default();
            for p in [&mut cfg.data.file, &mut cfg.shape.init.from_topo].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            cfg
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.output.svg |= cli.render;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let inputs = commands::inputs(&cfg)?;
    let dir = OutDir::create(&cfg.output.dir)?;
    match cli.command {
        Command::Forward => commands::forward(&cfg, &inputs, dir),
        Command::Topo => commands::topo(&cfg, &inputs, dir).map(|r| {
            log::info!("{} minima, centre estimate {:?}", r.minima.len(), r.center_estimate);
        }),
        Command::Stat => commands::stat(&cfg, &inputs, dir),
        Command::Shape => {
            let init = commands::shape_init(&cfg, None)?;
            commands::shape(&cfg, &inputs, &init, dir)
        }
        Command::All => commands::all(&cfg, &inputs, dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccbm {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
