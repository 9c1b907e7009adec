use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pfnav::harness::{
    arm_label, run_car_experiment, run_grid_experiment, Arms, ExperimentConfig,
};
use pfnav::Error;

#[derive(Parser)]
#[command(name = "pfnav", version, about = "Particle-filtered navigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    On,
    Off,
    Both,
}

impl From<FilterArg> for Arms {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::On => Arms::On,
            FilterArg::Off => Arms::Off,
            FilterArg::Both => Arms::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train tabular Q-learners on the grid task.
    GridTrain {
        /// Configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        filter: FilterArg,
        /// Comma-separated seeds, overriding `seeds` from the config.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve car controllers with NEAT.
    CarEvolve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        filter: FilterArg,
        /// Comma-separated radar noise levels in pixels.
        #[arg(long, value_delimiter = ',')]
        sigma_dist: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a configuration file without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: Option<&Path>) -> pfnav::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn or_default<T: Clone>(given: Vec<T>, fallback: &[T]) -> Vec<T> {
    if given.is_empty() {
        fallback.to_vec()
    } else {
        given
    }
}

fn run(cli: Cli) -> pfnav::Result<()> {
    match cli.command {
        Command::GridTrain {
            config,
            filter,
            seed,
            out,
        } => {
            let cfg = load(config.as_deref())?;
            let seeds = or_default(seed, &cfg.seeds);
            let results = run_grid_experiment(&cfg, filter.into(), &seeds, &out)?;
            for r in results {
                println!(
                    "seed {} filter {}: success rate {:.4}",
                    r.seed,
                    arm_label(r.filtered),
                    r.success_rate
                );
            }
        }
        Command::CarEvolve {
            config,
            filter,
            sigma_dist,
            seed,
            out,
        } => {
            let cfg = load(config.as_deref())?;
            let seeds = or_default(seed, &cfg.seeds);
            let levels = or_default(sigma_dist, &cfg.sigma_dist_levels);
            let results = run_car_experiment(&cfg, filter.into(), &seeds, &levels, &out)?;
            for r in results {
                println!(
                    "seed {} filter {} sigma_dist {}: final best {}",
                    r.seed,
                    arm_label(r.filtered),
                    r.sigma_dist,
                    r.final_best().map_or_else(|| "-".into(), |v| format!("{v:.2}"))
                );
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            cfg.load_track()?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
