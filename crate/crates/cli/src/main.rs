//! `meshnoise` command line.
//!
//! Exit codes: 0 success or all checks pass, 1 a check failed, 2 usage or
//! I/O error, 3 numerical error.

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "meshnoise",
    version,
    about = "Triangulation-agnostic noise on triangle meshes"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw noise fields on a mesh.
    Sample(SampleArgs),
    /// Check per-frequency statistics across triangulations of one surface.
    Verify(VerifyArgs),
    /// Write the generalized Laplacian spectrum of a mesh.
    Spectrum(SpectrumArgs),
    /// Transport Matérn noise to a spectral Gaussian target with flow matching.
    Fmdemo(FmdemoArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MeshArgs {
    /// Input mesh files (.obj or .ply).
    #[arg(value_name = "MESH")]
    pub meshes: Vec<PathBuf>,

    /// Use a generated unit icosphere with this many subdivision levels
    /// instead of a file.
    #[arg(long, value_name = "LEVEL", conflicts_with = "meshes")]
    pub icosphere: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct ScreeningArgs {
    /// Fixed screening τ (default 100).
    #[arg(long, conflicts_with = "c")]
    pub tau: Option<f64>,

    /// Scale-invariant screening τ = c·Γ.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "MESHNOISE_OUT_DIR", default_value = "meshnoise-out")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Naive,
    White,
    Matern,
    MaternNormalized,
    Explicit,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFormat {
    Ply,
    Csv,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Noise model.
    #[arg(long, value_enum, default_value = "matern")]
    pub model: Model,

    /// Number of samples.
    #[arg(long, short = 'n', default_value_t = 1)]
    pub n: usize,

    /// Seed for all randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Independent channels per sample.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,

    /// Modes used by the explicit sampler (default: all).
    #[arg(long)]
    pub modes: Option<usize>,

    /// Replace τ by 1e-8·Γ (Matérn only).
    #[arg(long)]
    pub no_screening: bool,

    /// Format of the written fields.
    #[arg(long, value_enum, default_value = "ply")]
    pub format: FieldFormat,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub screening: ScreeningArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Noise model.
    #[arg(long, value_enum, default_value = "matern")]
    pub model: Model,

    /// Add this many successive midpoint subdivisions of the first mesh.
    #[arg(long, default_value_t = 0)]
    pub subdivide: usize,

    /// Samples drawn per mesh.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,

    /// Seed for all randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Matched mode pairs compared between meshes.
    #[arg(long, default_value_t = 30)]
    pub pairs: usize,

    /// Relative eigenvalue tolerance for matching modes.
    #[arg(long, default_value_t = meshnoise::verify::DEFAULT_MATCH_TOL)]
    pub match_tol: f64,

    /// Largest accepted |correlation| between distinct modes.
    #[arg(long, default_value_t = meshnoise::verify::DEFAULT_CORRELATION_THRESHOLD)]
    pub correlation_threshold: f64,

    /// Leading modes whose pairwise correlations are checked (at most 30).
    #[arg(long, default_value_t = meshnoise::verify::MAX_CORRELATION_BLOCK)]
    pub correlation_block: usize,

    /// First mode (1-based) of the tail.
    #[arg(long, default_value_t = meshnoise::verify::DEFAULT_TAIL_K)]
    pub tail_k: usize,

    /// Tail threshold (default: twice the Weyl-predicted tail).
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// 1-based modes that get histograms.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 10, 30])]
    pub histograms: Vec<usize>,

    /// Histogram bins over ±4σ.
    #[arg(long, default_value_t = meshnoise::verify::DEFAULT_BINS)]
    pub bins: usize,

    /// Also run the scale-invariance test at these scales.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Number of eigenpairs (default: all).
    #[arg(long)]
    pub k: Option<usize>,

    /// 1-based eigenvectors to write as PLY vertex properties.
    #[arg(long, value_delimiter = ',')]
    pub eigenvectors: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct FmdemoArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Source samples pushed through the flow.
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,

    /// Generated samples compared with the reference set by MMD and COV.
    #[arg(long, default_value_t = 1000)]
    pub mmd_samples: usize,

    /// Midpoint steps on [0, 1].
    #[arg(long, default_value_t = meshnoise::flow::DEFAULT_STEPS)]
    pub steps: usize,

    /// Independent channels per sample.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,

    /// Seed for all randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Source screening.
    #[arg(long, default_value_t = meshnoise::DEFAULT_TAU)]
    pub tau: f64,

    /// Target screening.
    #[arg(long, default_value_t = meshnoise::flow::DEFAULT_TARGET_TAU)]
    pub target_tau: f64,

    /// Scalar applied to the source noise.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,

    /// Modes moved by the flow (default: all).
    #[arg(long)]
    pub modes: Option<usize>,

    /// Modes whose generated variance is checked.
    #[arg(long, default_value_t = 30)]
    pub variance_modes: usize,

    /// Largest accepted relative per-mode variance error.
    #[arg(long, default_value_t = 0.05)]
    pub variance_threshold: f64,

    /// Largest accepted MMD(generated)/MMD(reference halves).
    #[arg(long, default_value_t = 1.2)]
    pub mmd_ratio_threshold: f64,

    /// Generated samples written to disk.
    #[arg(long, default_value_t = 10)]
    pub write: usize,

    /// Format of the written fields.
    #[arg(long, value_enum, default_value = "ply")]
    pub format: FieldFormat,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Sample(args) => commands::sample(args),
        Command::Verify(args) => commands::verify(args),
        Command::Spectrum(args) => commands::spectrum(args),
        Command::Fmdemo(args) => commands::fmdemo(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
