use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "keysample",
    version,
    about = "Keyframe sampling and place-recognition evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select keyframes from a session.
    Sample(SampleArgs),
    /// Score a keyframe selection by retrieval.
    Evaluate(EvaluateArgs),
    /// Report the redundancy and information-preservation terms of a selection.
    Terms(TermsArgs),
    /// Generate a synthetic session.
    Synth(SynthArgs),
    /// Time the window optimizer and a query sweep.
    Bench(BenchArgs),
}

/// A session given either as a directory holding `poses.tum` (or
/// `poses.txt`), `descriptors.kdsc` and an optional `scans/`, or as
/// individual files.
#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    #[arg(long, value_name = "DIR")]
    pub session: Option<PathBuf>,
    /// KITTI (`.txt`) or TUM (`.tum`) poses. Overrides the directory's.
    #[arg(long, value_name = "FILE")]
    pub poses: Option<PathBuf>,
    /// KDSC or CSV descriptors, one row per frame.
    #[arg(long, value_name = "FILE")]
    pub descriptors: Option<PathBuf>,
    /// Directory of `.bin` point clouds, one per frame.
    #[arg(long, value_name = "DIR")]
    pub scans: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long, value_name = "DIR")]
    pub query_session: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub query_poses: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub query_descriptors: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: SessionArgs,
    /// all, constant, spaciousness, entropy or optimized.
    #[arg(long)]
    pub method: Option<String>,
    /// Constant-sampler spacing, meters.
    #[arg(long)]
    pub interval: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Window size N.
    #[arg(long)]
    pub window: Option<usize>,
    /// Lower distance bound between selected keyframes, meters.
    #[arg(long)]
    pub dl: Option<f64>,
    /// Upper distance bound, also the revisit radius, meters.
    #[arg(long)]
    pub du: Option<f64>,
    #[arg(long)]
    pub min_motion: Option<f64>,
    /// Traveled distance before a stored keyframe counts as a revisit.
    #[arg(long)]
    pub revisit_travel: Option<f64>,
    #[arg(long)]
    pub entropy_threshold: Option<f64>,
    #[arg(long)]
    pub entropy_bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: SessionArgs,
    #[command(flatten)]
    pub query: QueryArgs,
    /// Selected ids, one per line. Defaults to every frame.
    #[arg(long, value_name = "FILE")]
    pub ids: Option<PathBuf>,
    /// gpr or lcd.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub tp_radius: Option<f64>,
    /// LCD candidate count.
    #[arg(long)]
    pub k: Option<usize>,
    /// LCD exclusion window: frames (`100`) or seconds (`30s`).
    #[arg(long)]
    pub exclusion: Option<String>,
    #[arg(long)]
    pub thresholds: Option<usize>,
    /// euclidean or sector-shift.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TermsArgs {
    #[command(flatten)]
    pub input: SessionArgs,
    #[arg(long, value_name = "FILE")]
    pub ids: Option<PathBuf>,
    /// Window length for averaging the preservation term.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// loop, figure_eight or line.
    #[arg(long)]
    pub shape: Option<String>,
    /// Lap length, meters.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub laps: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub freq_sigma: Option<f64>,
    #[arg(long)]
    pub pose_noise: Option<f64>,
    #[arg(long)]
    pub descriptor_noise: Option<f64>,
    #[arg(long)]
    pub frame_period: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the descriptor field, defaults to `--seed`. Sessions sharing
    /// it observe the same place appearance.
    #[arg(long)]
    pub field_seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: SessionArgs,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Stop each run after this many optimization cycles.
    #[arg(long)]
    pub max_cycles: Option<usize>,
    /// Synthetic loop used when no session is given.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub laps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}
