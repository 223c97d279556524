//! Command-line pipeline: complexity measurement, shape fitting, point extraction and
//! evaluation over Gaussian splat scenes.
//!
//! [`run`] parses arguments and executes one subcommand; the binary is a thin wrapper that
//! prints the [`Outcome`] and maps errors to exit codes with [`exit_code`].

mod commands;
pub mod config;
mod synth;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_chamfer, cmd_complexity, cmd_extract, cmd_fit, cmd_report, cmd_spectrum_validate,
};
pub use config::PipelineConfig;
pub use synth::{cmd_synth, SynthOptions};

/// Result of a successful command: a JSON summary and a human-readable rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: serde_json::Value,
    pub text: String,
}

/// A run that completed but missed its quality threshold. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityGate {
    pub message: String,
    pub outcome: Outcome,
}

impl fmt::Display for QualityGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "quality gate failed: {}", self.message)
    }
}

impl std::error::Error for QualityGate {}

/// 0 on success, 2 for a quality-gate failure, 1 for anything else.
pub fn exit_code(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(_) => 0,
        Err(e) if e.downcast_ref::<QualityGate>().is_some() => 2,
        Err(_) => 1,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "splatgeom",
    version,
    about = "Semantic-aware geometry tools for Gaussian splat clouds"
)]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SPLATGEOM_THREADS")]
    pub threads: Option<usize>,
    /// Print a JSON summary instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure per-group geometric complexity from masks and images.
    Complexity(ComplexityArgs),
    /// Fit splat shapes to their group targets, with opacity pruning.
    Fit(FitArgs),
    /// Extract a point cloud from splats.
    Extract(ExtractArgs),
    /// Chamfer mean and variance between two point files.
    Chamfer(ChamferArgs),
    /// Check the edge-count versus high-pass-energy correlation on an image corpus.
    SpectrumValidate(SpectrumArgs),
    /// Write a seeded synthetic scene bundle.
    Synth(SynthArgs),
    /// Format Chamfer results as a scene × method table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CannyArgs {
    #[arg(long)]
    pub canny_sigma: Option<f64>,
    #[arg(long)]
    pub canny_low: Option<f64>,
    #[arg(long)]
    pub canny_high: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ComplexityArgs {
    /// Cameras JSON; each entry names its mask.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Root for the cameras' mask paths (defaults to the cameras file's directory).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Directory of grayscale images named like their masks.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// JSON object mapping label id to caption.
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Output report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub splats: Option<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Complexity report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Output directory for fitted.ply, trace.csv and fit.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recompute targets from the report's unit perplexities with these constants.
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub lambda_gc: Option<f64>,
    #[arg(long)]
    pub lambda_dssim: Option<f64>,
    #[arg(long)]
    pub lambda_l1: Option<f64>,
    /// Pruning warmup in iterations (default: one fifth of --iters).
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// huber, smooth-abs or logistic.
    #[arg(long)]
    pub penalty: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// log-ratio or ratio.
    #[arg(long)]
    pub residual: Option<String>,
    /// Recorded in the output metadata; the fit itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with code 2 when the final gc loss exceeds this.
    #[arg(long)]
    pub max_gc_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output points PLY.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// hierarchical or mean.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub min_alpha: Option<f64>,
    /// Crop box as "x0,y0,z0,x1,y1,z1".
    #[arg(long)]
    pub crop: Option<String>,
    /// alpha or alpha-sqrt-det.
    #[arg(long)]
    pub weighting: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ChamferArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Use squared distances.
    #[arg(long)]
    pub squared: bool,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    /// Directory of PNG images; a square-perimeter corpus is generated when absent.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Radial high-pass cutoff in cycles per pixel.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Exit with code 2 below this correlation.
    #[arg(long, default_value_t = 0.9)]
    pub min_r: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    /// JSON object: scene → method → {"mean", "var"}.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the selected command.
pub fn run<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli)
}

/// Runs an already-parsed command line.
pub fn execute(cli: Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Complexity(a) => cmd_complexity(a, &config),
        Command::Fit(a) => cmd_fit(a, &config),
        Command::Extract(a) => cmd_extract(a, &config),
        Command::Chamfer(a) => cmd_chamfer(a),
        Command::SpectrumValidate(a) => cmd_spectrum_validate(a, &config),
        Command::Synth(a) => {
            let out = a
                .out
                .clone()
                .or_else(|| config.paths.output.clone())
                .context("synth needs --out")?;
            let seed = a
                .seed
                .or(config.sampling.seed)
                .context("synth needs --seed")?;
            cmd_synth(&SynthOptions::new(out, seed))
        }
        Command::Report(a) => cmd_report(a),
    })
}
