//! `aesgrad`: build aesthetic embeddings, personalize prompts and run the
//! paired experiment from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use aesgrad_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aesgrad",
    version,
    about = "Aesthetic-gradient personalization of a miniature CLIP text encoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average image embeddings into a unit-norm aesthetic file (.aese).
    Embed(EmbedArgs),
    /// Personalize one prompt and write c, c′ and the ascent trace.
    Personalize(PersonalizeArgs),
    /// Run the paired original/personalized experiment over the prompt table.
    Experiment(ExperimentArgs),
    /// Describe an .aese, .aesc or .mclp file.
    Inspect(InspectArgs),
    /// Write freshly initialized encoder weights (.mclp).
    InitWeights(InitWeightsArgs),
    /// Write a linear scorer aligned with an aesthetic (.aesc).
    MakeScorer(MakeScorerArgs),
}

/// Where the run configuration comes from; flags on each command override it.
#[derive(Args)]
struct ConfigSource {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset used when no --config is given.
    #[arg(long, default_value = "toy-default")]
    preset: String,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Embedding files (raw f32 or .csv), or toy images with --images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Embedding width; required for raw float files.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value = "aesthetic")]
    name: String,
    #[arg(long)]
    out: PathBuf,
    /// Treat inputs as 32×32 grayscale images and run them through the
    /// vision tower.
    #[arg(long)]
    images: bool,
    /// Encoder weights for --images; derived from --seed when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recorded creation time (RFC 3339); defaults to now.
    #[arg(long)]
    created_at: Option<String>,
}

#[derive(Args)]
struct PersonalizeArgs {
    #[arg(long)]
    prompt: String,
    /// Aesthetic file; synthesized from the seed when omitted.
    #[arg(long)]
    aesthetic: Option<PathBuf>,
    /// Encoder weights; derived from the seed when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// gradient-ascent or sgld.
    #[arg(long)]
    optimizer: Option<aesgrad_core::Optimizer>,
    /// SGLD temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Normalize c inside the objective.
    #[arg(long)]
    normalize_text: bool,
    #[command(flatten)]
    source: ConfigSource,
    #[arg(long, default_value = "personalized")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Adds the keyword-append condition.
    #[arg(long)]
    keyword: Option<String>,
    #[arg(long)]
    seeds_per_prompt: Option<usize>,
    /// Output directory, overriding the configuration (default "report").
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Run prompts one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
    /// Skip the unit-norm check on aesthetic files.
    #[arg(long)]
    no_check: bool,
}

#[derive(Args)]
struct InitWeightsArgs {
    /// Encoder preset: toy-default or tiny.
    #[arg(long, default_value = "toy-default")]
    encoder: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MakeScorerArgs {
    #[arg(long)]
    aesthetic: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    gain: f64,
    #[arg(long, default_value_t = 5.0)]
    bias: f64,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io(_) | Error::Contract(_) | Error::Determinism(_) => 1,
        Error::Input(_) | Error::Config(_) | Error::Dimension { .. } | Error::Degenerate(_) => 3,
        Error::Format(_) => 4,
        Error::Numeric { .. } => 5,
        Error::UnknownMagic(_) => 6,
        Error::Prompt { .. } => unreachable!("root strips prompt wrappers"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Embed(a) => commands::embed(a),
        Command::Personalize(a) => commands::personalize(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::InitWeights(a) => commands::init_weights(a),
        Command::MakeScorer(a) => commands::make_scorer(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
