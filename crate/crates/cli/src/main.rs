use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qnas::config::RunConfig;
use qnas::stages;
use qnas_core::error::Error;

/// Noise-adaptive search, training and pruning for variational quantum
/// circuits.
#[derive(Parser)]
#[command(name = "qnas", version, about)]
struct Cli {
    /// Run configuration file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the run directory from the config
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    /// Override the seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap concurrent estimator evaluations
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the SuperCircuit with restricted SubCircuit sampling
    TrainSuper,
    /// Evolutionary co-search of SubCircuit and qubit mapping
    Search {
        /// SuperCircuit checkpoint (default: <run dir>/super.ckpt)
        #[arg(long)]
        super_ckpt: Option<PathBuf>,
    },
    /// Train the searched SubCircuit from scratch
    TrainSub {
        /// Gene file (default: <run dir>/best_gene.txt)
        #[arg(long)]
        gene: Option<PathBuf>,
        /// Bypass the gene and train a circuit from a text file
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Iterative magnitude pruning with a final-ratio sweep
    Prune {
        /// SubCircuit checkpoint (default: <run dir>/sub.ckpt)
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Report metrics, compiled statistics and success rate
    Eval {
        /// Checkpoint (default: <run dir>/pruned.ckpt, else sub.ckpt)
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// pure | noisy | both
        #[arg(long, default_value = "both")]
        backend: String,
    },
    /// Run the parameter-shift vs finite-difference oracle suite
    GradCheck,
    /// Print the evaluation-count bookkeeping for a finished run
    CostReport {
        /// Number of target devices in the hypothetical naive flow
        #[arg(long, default_value_t = 1)]
        devices: u64,
    },
}

fn exit_code_of(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::Spec(_) | Error::Unsupported(_) => 2,
        Error::Numeric(_) => 3,
        Error::Capacity(_) => 4,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Validation("this command needs --config <file>".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.run_dir {
        cfg.run.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Validation(format!("--jobs: {e}")))?;
    }
    match &cli.cmd {
        Cmd::TrainSuper => stages::cmd_train_super(&load_config(cli)?),
        Cmd::Search { super_ckpt } => stages::cmd_search(&load_config(cli)?, super_ckpt.as_deref()),
        Cmd::TrainSub { gene, circuit } => {
            stages::cmd_train_sub(&load_config(cli)?, gene.as_deref(), circuit.as_deref())
        }
        Cmd::Prune { ckpt } => stages::cmd_prune(&load_config(cli)?, ckpt.as_deref()),
        Cmd::Eval { ckpt, backend } => {
            stages::cmd_eval(&load_config(cli)?, ckpt.as_deref(), backend).map(|_| ())
        }
        Cmd::GradCheck => stages::cmd_grad_check(),
        Cmd::CostReport { devices } => stages::cmd_cost_report(&load_config(cli)?, *devices),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_of(&err))
        }
    }
}
