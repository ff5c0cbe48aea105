//! `hopest` binary: closed-loop hopper simulation, estimator training,
//! log evaluation, sensing-frequency sweeps, agility tables, and dataset
//! subsetting, all driven by TOML configs.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hopest::Error;

#[derive(Parser)]
#[command(name = "hopest", version, about = "Inertial-only vertical state estimation toolkit for hopping robots")]
struct Cli {
    /// Directory artifacts are written to.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Override the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the filter kind: kf1, kf2, eskf1, eskf2.
    #[arg(long, global = true)]
    filter: Option<String>,

    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run closed-loop trials; writes per-trial CSV logs and metrics.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Which state feeds the controller: gt (true state) or se (estimate).
        #[arg(long)]
        control_source: Option<String>,
    },
    /// Fit estimator parameters to recorded logs; writes best_params.json
    /// and history.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay recorded logs with given parameters and score them.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run noisy and noise-free trials across sensing frequencies; writes
    /// sweep.csv with per-frequency error statistics.
    SweepFreq {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute agility numbers from a CSV of platform inputs.
    Agility {
        /// Input table; measured mode needs h1,t_apogee,t_cycle columns,
        /// model mode the full parameter set.
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Draw a per-height stratified subset of hops from recorded logs.
    Subset {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: &Cli) -> hopest::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let out = &cli.out_dir;
    match &cli.cmd {
        Cmd::Simulate { config, control_source } => {
            commands::cmd_simulate(config, out, cli.seed, &cli.filter, control_source)
        }
        Cmd::Train { config } => commands::cmd_train(config, out, cli.seed, &cli.filter),
        Cmd::Evaluate { config } => commands::cmd_evaluate(config, out, &cli.filter),
        Cmd::SweepFreq { config } => commands::cmd_sweep_freq(config, out, cli.seed),
        Cmd::Agility { inputs } => commands::cmd_agility(inputs, out),
        Cmd::Subset { config } => commands::cmd_subset(config, out, cli.seed),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(match e {
            Error::Config(_) => 2,
            _ => 3,
        });
    }
}
