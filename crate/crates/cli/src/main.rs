//! Pipeline front end: every stage of the drawing-induction workflow as a
//! subcommand, handing artifacts between stages through plain files.
//!
//! Exit codes: 0 on success, 2 on any validation or input error, 3 when a
//! search budget ran out and the output holds partial results.

use clap::{Args, Parser, Subcommand, ValueEnum};
use limn_core::config::{schema, Budget};
use limn_core::induction;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod formats;

fn version_string() -> String {
    format!(
        "{} (schemas: corpus {}, checkpoint {}, traces {}, theta {})",
        env!("CARGO_PKG_VERSION"),
        schema::CORPUS,
        schema::CHECKPOINT,
        schema::TRACES,
        schema::THETA,
    )
}

#[derive(Parser)]
#[command(name = "limn", about = "Program induction for line drawings", version = version_string())]
struct Cli {
    /// Worker threads for search and scoring (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a stimulus corpus: a JSON manifest plus one PGM per image.
    Gen(GenArgs),
    /// Train a library on a corpus and write a checkpoint.
    Train(TrainArgs),
    /// Infer ranked programs for a corpus under a trained checkpoint.
    Solve(SolveArgs),
    /// Expand solved programs into their admissible stroke orderings.
    Ground(GroundArgs),
    /// Fit per-subject motor-cost weights from drawing traces.
    FitTheta(FitThetaArgs),
    /// Score human traces against a model variant's trajectory distribution.
    Score(ScoreArgs),
    /// Sample programs from a checkpoint's prior and render them.
    Dream(DreamArgs),
    /// Render a program text file to PGM or SVG.
    Render(RenderArgs),
    /// Summarize traces per subject: vertical score, strategy, weights.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SetName {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Test,
}

#[derive(Args)]
struct GenArgs {
    /// Which stimulus set: the two training distributions or the fixed
    /// 18-item test catalog.
    #[arg(long, value_enum)]
    set: SetName,
    /// Training images to generate (ignored for the fixed test set).
    #[arg(long, default_value_t = 36)]
    count: usize,
    /// Sampling seed (defaults to the canonical per-set seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus directory produced by `gen`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 20)]
    cycles: usize,
    /// Per-image search timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Per-image search cap in completed programs; the cap keeps equal
    /// configurations byte-identical when machines differ in speed.
    #[arg(long, default_value_t = Budget::default().max_programs)]
    max_programs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Dreams sampled per cycle for recognition training.
    #[arg(long, default_value_t = 1500)]
    dreams: usize,
    /// Checkpoint path; metrics CSV and run manifest land next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Corpus directory of images to solve.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = Budget::default().max_programs)]
    max_programs: u64,
    /// Programs kept per image.
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroundArgs {
    /// Solve output JSON.
    #[arg(long)]
    programs: PathBuf,
    /// Checkpoint whose library the program texts are written in
    /// (omit for base-library programs).
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitThetaArgs {
    /// Traces as JSON lines.
    #[arg(long)]
    traces: PathBuf,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Fit the six-feature weight vector instead of the basic four.
    #[arg(long)]
    extended: bool,
    /// Corpus directory naming the drawn images, for per-image grids
    /// (default: the test catalog's grid).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Seed for permutation subsampling on large token sets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantName {
    Null,
    Mc,
    Pi,
    Hm,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    variant: VariantName,
    /// Checkpoint (required for pi and hm).
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Theta file from fit-theta; its general vector is used
    /// (required for mc and hm).
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Human traces as JSON lines.
    #[arg(long)]
    humans: PathBuf,
    /// Corpus directory of the drawn images.
    #[arg(long)]
    images: PathBuf,
    /// Solve output giving each image's top program (pi and hm; images
    /// missing from it are skipped).
    #[arg(long)]
    programs: Option<PathBuf>,
    /// Skip items whose best program does not render exactly, instead of
    /// scoring the best partial program.
    #[arg(long)]
    exclude_unsolved: bool,
    /// Seed for permutation subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DreamArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// File holding one program in text form.
    #[arg(long)]
    program: PathBuf,
    /// Checkpoint whose library the text is written in.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Output path; the extension picks the format (.pgm or .svg).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Traces as JSON lines.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Corpus directory naming the drawn images, for per-image grids
    /// (default: the test catalog's grid).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Seed for permutation subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Any failure worth a message and exit 2.
#[derive(Debug)]
struct CliError(String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> CliError {
        let mut msg = e.to_string();
        let mut src = e.source();
        while let Some(s) = src {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            src = s.source();
        }
        CliError(msg)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

/// Success, possibly with the partial-results exit code.
enum Outcome {
    Done,
    Partial(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("--jobs must be at least 1");
            return ExitCode::from(2);
        }
        // Sizes the worker pool for parallel search; builds without the
        // parallel runtime simply run sequentially.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let run = match cli.cmd {
        Cmd::Gen(a) => commands::gen(a),
        Cmd::Train(a) => commands::train(a),
        Cmd::Solve(a) => commands::solve(a),
        Cmd::Ground(a) => commands::ground(a),
        Cmd::FitTheta(a) => commands::fit_theta(a),
        Cmd::Score(a) => commands::score(a),
        Cmd::Dream(a) => commands::dream(a),
        Cmd::Render(a) => commands::render(a),
        Cmd::Analyze(a) => commands::analyze(a),
    };
    match run {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Loads a checkpoint file into a training state.
fn load_ckpt(path: &PathBuf) -> Result<induction::TrainState, CliError> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let cp: induction::checkpoint::Checkpoint = serde_json::from_str(&data)?;
    Ok(induction::checkpoint::load(&cp)?)
}
