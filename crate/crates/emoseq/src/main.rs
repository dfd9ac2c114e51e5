use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emoseq::commands::{cmd_ablate, cmd_eval, cmd_predict, cmd_train};
use emoseq::config::Overrides;

/// Sequence emotion classifier: TF-IDF-gated embeddings, LSTM, multi-head
/// self-attention with learned fusion.
#[derive(Parser)]
#[command(name = "emoseq", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Default)]
struct TrainFlags {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV with header `text,label`.
    #[arg(long)]
    data: Option<String>,
    /// Directory for artifacts and reports.
    #[arg(long)]
    output_dir: Option<String>,
    /// Master seed (splits, init, shuffling).
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    /// Examples per optimizer step.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr0: Option<f64>,
    /// Sequence length (truncate/pad).
    #[arg(long)]
    max_len: Option<usize>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

impl TrainFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            data: self.data.clone(),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            max_len: self.max_len,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and write artifact plus reports.
    Train(TrainFlags),
    /// Evaluate a stored model on a labeled CSV; prints the JSON report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Classify one text; prints classes ranked by probability.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Train all four architecture variants and write ablation.csv.
    Ablate(TrainFlags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Train(f) => cmd_train(f.config.as_deref(), &f.overrides(), f.quiet),
        Cmd::Eval { model, data } => cmd_eval(model, data),
        Cmd::Predict { model, text } => cmd_predict(model, text),
        Cmd::Ablate(f) => cmd_ablate(f.config.as_deref(), &f.overrides(), f.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
