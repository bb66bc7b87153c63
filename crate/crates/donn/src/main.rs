use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use donn::cli::{
    cmd_eval, cmd_export_field, cmd_sweep, cmd_train_correcting, cmd_train_optical, SweepKind,
};
use donn::dataio::config::RunConfig;
use donn::dataio::idx::Split;
use donn::error::Result;

#[derive(Parser)]
#[command(
    name = "donn",
    about = "Train and probe binarized diffractive optical neural networks"
)]
struct Cli {
    /// Key=value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the optical section and write a binarized checkpoint.
    TrainOptical {
        #[arg(long)]
        dataset_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Warm-start from this checkpoint's phases.
        #[arg(long)]
        init_checkpoint: Option<PathBuf>,
    },
    /// Train the correcting layer against a binarized checkpoint.
    TrainCorrecting {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint; writes the confusion matrix CSV.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset_dir: PathBuf,
        /// Dataset split: train or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// Classify through the stored correcting layer.
        #[arg(long)]
        use_correcting: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep an error axis over a value grid.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        /// axial | theta | kratio | geometry | distance | layers
        #[arg(long)]
        kind: String,
        /// Comma-separated values; theta accepts a `pi` suffix.
        #[arg(long)]
        grid: String,
        /// Retrain the correcting layer at each point.
        #[arg(long)]
        retrain_correcting: bool,
        #[arg(long)]
        dataset_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-plane intensity CSVs for one sample.
    ExportField {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset_dir: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(donn::DonnError::InvalidParameter(format!(
            "split must be train or test, got {s}"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match cli.command {
        Command::TrainOptical {
            dataset_dir,
            out,
            init_checkpoint,
        } => {
            cmd_train_optical(&cfg, &dataset_dir, &out, init_checkpoint.as_deref())?;
        }
        Command::TrainCorrecting {
            checkpoint,
            dataset_dir,
            out,
        } => {
            cmd_train_correcting(&cfg, &checkpoint, &dataset_dir, &out)?;
        }
        Command::Eval {
            checkpoint,
            dataset_dir,
            split,
            use_correcting,
            out,
        } => {
            cmd_eval(
                &cfg,
                &checkpoint,
                &dataset_dir,
                parse_split(&split)?,
                use_correcting,
                &out,
            )?;
        }
        Command::Sweep {
            checkpoint,
            kind,
            grid,
            retrain_correcting,
            dataset_dir,
            out,
        } => {
            cmd_sweep(
                &cfg,
                &checkpoint,
                SweepKind::parse(&kind)?,
                &grid,
                retrain_correcting,
                &dataset_dir,
                &out,
            )?;
        }
        Command::ExportField {
            checkpoint,
            dataset_dir,
            split,
            index,
            out,
        } => {
            cmd_export_field(
                &cfg,
                &checkpoint,
                &dataset_dir,
                parse_split(&split)?,
                index,
                &out,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
