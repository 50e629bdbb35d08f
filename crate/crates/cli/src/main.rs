use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use npmon_cli::commands::{self, TrainArgs};
use npmon_cli::CliError;
use npmon_core::data::GenMode;
use npmon_core::nets::{MonitorKind, Profile};

#[derive(Parser)]
#[command(name = "npmon", version, about = "Neural predictive monitoring of hybrid systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ind,
    Seq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Approach {
    E2e,
    TwoStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled dataset.
    Gen {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "ind")]
        mode: Mode,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sliding windows per trajectory in sequential mode.
        #[arg(long, default_value_t = 100)]
        windows_per_traj: usize,
    },
    /// Split a dataset, train and calibrate a monitor, and save a bundle.
    Train {
        #[arg(long, value_enum)]
        approach: Option<Approach>,
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seeds listed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a bundle on its test split.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Run active-learning iterations on fresh pools.
    Active {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        pool: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Evaluate the test split with inflated observation noise.
    Anomaly {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Compare the learned state estimator with an unscented Kalman filter.
    CompareSe {
        #[arg(long)]
        bundle: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            model,
            mode,
            n,
            seed,
            out,
            windows_per_traj,
        } => {
            let mode = match mode {
                Mode::Ind => GenMode::Independent,
                Mode::Seq => GenMode::Sequential,
            };
            commands::gen(&model, mode, n, windows_per_traj, seed, &out)
        }
        Command::Train {
            approach,
            profile,
            data,
            out,
            config,
            seed,
        } => {
            let args = TrainArgs {
                data,
                out,
                config,
                approach: approach.map(|a| match a {
                    Approach::E2e => MonitorKind::EndToEnd,
                    Approach::TwoStep => MonitorKind::TwoStep,
                }),
                profile: profile.map(|p| match p {
                    ProfileArg::Desk => Profile::Desk,
                    ProfileArg::Paper => Profile::Paper,
                }),
                seed,
            };
            commands::train(&args).map(drop)
        }
        Command::Eval { bundle, eps } => commands::eval(&bundle, eps.as_deref()).map(drop),
        Command::Active { bundle, pool, iters } => commands::active(&bundle, pool, iters),
        Command::Anomaly { bundle, noise_scale } => commands::anomaly(&bundle, noise_scale).map(drop),
        Command::CompareSe { bundle } => commands::compare_se(&bundle),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("npmon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
