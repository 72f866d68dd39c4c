//! `prmcs`: perturb captions, train the text encoder, score and evaluate.
//!
//! Every command takes `--config <file.json>`; flags override keys of the
//! same name. The resolved configuration is logged to stderr.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prmcs::textproc::PerturbationKind;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "prmcs",
    version,
    about = "Perturbation-robust caption scoring toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one perturbed copy of every record per requested kind.
    Perturb(PerturbArgs),
    /// Generate a synthetic image/caption corpus.
    Synth(SynthArgs),
    /// Train the text encoder.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Score captions against their images.
    Score(ScoreArgs),
    /// Robustness and correlation reports.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Subcommand, Debug)]
enum TrainCommand {
    /// Regress encoder outputs onto teacher embeddings keyed by caption id.
    Distill(TrainArgs),
    /// Perturbation-robust fine-tuning.
    Pr(TrainArgs),
    /// Perturbation-robust fine-tuning on a tenth of the data.
    FewShot(TrainArgs),
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Per-language, per-kind score drop between two score files.
    Drop(DropArgs),
    /// Kendall tau-c and Pearson r of an `x,y` CSV.
    Corr(CorrArgs),
}

#[derive(Args, Debug, Serialize)]
struct PerturbArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<PerturbationKind>>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed object order for Substitution, e.g. `2,3,0,1`.
    #[arg(long, value_delimiter = ',')]
    force_permutation: Option<Vec<usize>>,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output PRMC file; the manifest is written beside it.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Output caption JSONL.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Optional PRMC of distillation targets: each caption's image row, keyed by caption id.
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    vocab_words: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Image embeddings (pr, few-shot).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Teacher caption embeddings (distill).
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Starting checkpoint; a fresh encoder is initialized when absent.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Evaluation split JSONL (few-shot).
    #[arg(long)]
    split_out: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    #[arg(long)]
    gate_gain: Option<f64>,
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<PerturbationKind>>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    l3: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Encoder checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    w: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct DropArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Scores of the unperturbed captions.
    #[arg(long)]
    original: Option<PathBuf>,
    #[arg(long)]
    perturbed: Option<PathBuf>,
    /// JSON report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CorrArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct GradcheckArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Checks seeds `0..seeds`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    #[arg(long)]
    gate_gain: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    use config::resolve;
    match cli.command {
        Command::Perturb(a) => commands::perturb(resolve("perturb", a.config.as_deref(), &a)?),
        Command::Synth(a) => commands::synth(resolve("synth", a.config.as_deref(), &a)?),
        Command::Train(TrainCommand::Distill(a)) => {
            commands::distill(resolve("train distill", a.config.as_deref(), &a)?)
        }
        Command::Train(TrainCommand::Pr(a)) => {
            commands::train_pr(resolve("train pr", a.config.as_deref(), &a)?)
        }
        Command::Train(TrainCommand::FewShot(a)) => {
            commands::few_shot(resolve("train few-shot", a.config.as_deref(), &a)?)
        }
        Command::Score(a) => commands::score(resolve("score", a.config.as_deref(), &a)?),
        Command::Eval(EvalCommand::Drop(a)) => {
            commands::eval_drop(resolve("eval drop", a.config.as_deref(), &a)?)
        }
        Command::Eval(EvalCommand::Corr(a)) => {
            commands::eval_corr(resolve("eval corr", a.config.as_deref(), &a)?)
        }
        Command::Gradcheck(a) => {
            commands::gradcheck(resolve("gradcheck", a.config.as_deref(), &a)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
