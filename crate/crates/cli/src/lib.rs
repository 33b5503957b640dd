//! The `slumkit` command line: rasterize, augment, evaluate, change, synth
//! and losscheck.
//!
//! Exit codes: 0 on success, 1 for usage and validation failures, 2 for
//! filesystem failures.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "slumkit",
    version,
    about = "Slum mapping toolkit: masks, metrics, change detection"
)]
pub struct Cli {
    /// Worker threads (0 picks one per core).
    #[arg(long, global = true, env = "SLUMKIT_JOBS", default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one PNG mask per ground-truth annotation.
    Rasterize(RasterizeArgs),
    /// Resize-pad and randomly augment every scene of a dataset.
    Augment(AugmentArgs),
    /// Score predictions against ground truth (AP50, IoU).
    Evaluate(EvaluateArgs),
    /// Compare two epochs of one scene.
    Change(ChangeArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
    /// Check analytic loss gradients against finite differences.
    Losscheck(LosscheckArgs),
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory for `<scene>_<nnn>.png` masks.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the rasterized annotations as a score-1 prediction file.
    #[arg(long, value_name = "FILE")]
    pub as_predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// JSON parameter ranges; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Augment at the original size instead of resize-padding to 1024.
    #[arg(long)]
    pub no_resize: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou_thresh: f64,
    /// Minimum score for a detection to enter the union-IoU masks.
    #[arg(long, default_value_t = 0.5)]
    pub score_floor: f64,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-scene CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Pooled precision-recall curve as CSV.
    #[arg(long)]
    pub pr_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChangeArgs {
    /// Earlier epoch: a prediction list or a dataset (ground truth).
    #[arg(long)]
    pub before: PathBuf,
    /// Later epoch, same formats as `--before`.
    #[arg(long)]
    pub after: PathBuf,
    #[arg(long)]
    pub scene: String,
    /// Scene id in the later epoch, when it differs.
    #[arg(long)]
    pub scene_after: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub score_floor: f64,
    /// Indexed PNG of stable/added/removed pixels.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// JSON result.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator settings; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Rasterize(a) => commands::rasterize(a),
        Command::Augment(a) => commands::augment(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Change(a) => commands::change(a),
        Command::Synth(a) => commands::synth(a),
        Command::Losscheck(a) => commands::losscheck(a),
    })
}
