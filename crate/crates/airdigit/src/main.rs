use airdigit::imu::Provenance;
use airdigit::pipeline::{
    cmd_evaluate, cmd_generate, cmd_preprocess, cmd_report, cmd_train, ExperimentConfig,
    PipelineError, TrainOverrides,
};
use airdigit::signal::ChannelKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Air-written digit workbench: generate simulated gesture datasets, run the
/// preprocessing chain, train the transfer classifier and render reports.
#[derive(Parser)]
#[command(name = "airdigit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the robot grid and the human-like set into a dataset tree.
    Generate {
        /// Experiment config JSON (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the global seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Filter, resample and vectorize every sample of a dataset.
    Preprocess {
        /// Dataset directory holding manifest.json.
        #[arg(long)]
        dataset: PathBuf,
        /// Feature store path (default: <dataset>/features.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on robot features, test on human-like features.
    Train {
        /// Feature store produced by `preprocess`.
        #[arg(long)]
        features: PathBuf,
        /// Output directory for report and checkpoint files.
        #[arg(long)]
        out: PathBuf,
        /// Input channel: accel | vel | traj (default from the config echo).
        #[arg(long)]
        channel: Option<ChannelKind>,
        /// Override the iteration count.
        #[arg(long)]
        iterations: Option<usize>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-score a saved checkpoint on a feature store subset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Subset to score: human | robot.
        #[arg(long, default_value = "human")]
        provenance: Provenance,
    },
    /// Render one or more report files side by side.
    Report {
        /// report-*.json files from `train`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write per-iteration accuracy curves as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut config = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let manifest = cmd_generate(&config, &out)?;
            let robot = manifest
                .entries
                .iter()
                .filter(|e| e.provenance == Provenance::Robot)
                .count();
            println!(
                "wrote {} samples ({robot} robot, {} human-like) under {}",
                manifest.entries.len(),
                manifest.entries.len() - robot,
                out.display()
            );
        }
        Command::Preprocess { dataset, out } => {
            let (store, path) = cmd_preprocess(&dataset, out.as_deref())?;
            println!("wrote {} feature vectors to {}", store.entries.len(), path.display());
        }
        Command::Train { features, out, channel, iterations, seed } => {
            let overrides = TrainOverrides { channel, iterations, seed };
            let (report, path) = cmd_train(&features, &out, &overrides)?;
            println!(
                "{} iterations done: mean accuracy {:.2}% (std {:.2}); report at {}",
                report.records.len(),
                report.mean_accuracy * 100.0,
                report.std_accuracy * 100.0,
                path.display()
            );
        }
        Command::Evaluate { checkpoint, features, provenance } => {
            let outcome = cmd_evaluate(&checkpoint, &features, provenance)?;
            println!(
                "accuracy {:.2}% over {} {} samples",
                outcome.accuracy * 100.0,
                outcome.sample_count,
                provenance
            );
        }
        Command::Report { reports, curves } => {
            let text = cmd_report(&reports, curves.as_deref())?;
            print!("{text}");
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
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
