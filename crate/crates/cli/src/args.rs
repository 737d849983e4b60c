//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "unimatte", version, about = "Automatic image matting toolkit")]
pub struct Cli {
    /// Worker threads for per-image work.
    #[arg(long, global = true, env = "UNIMATTE_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Composite foregrounds over backgrounds into a training set.
    Composite(CompositeArgs),
    /// Write trimaps and unified representations for a manifest.
    MakeReps(MakeRepsArgs),
    /// Predict alpha mattes with the two-scale strategy.
    Infer(InferArgs),
    /// Score predictions and write the benchmark report.
    Evaluate(EvaluateArgs),
    /// Print the layer table and parameter / MAC totals.
    Audit(AuditArgs),
    /// Write a seeded weight store.
    InitWeights(InitWeightsArgs),
    /// Count manifest entries per type, category and split.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct CompositeArgs {
    /// Foreground manifest; `fg` is used when present, else `image`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of background PNGs, used in file-name order.
    #[arg(long)]
    pub backgrounds: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Backgrounds per foreground.
    #[arg(long, default_value_t = 5)]
    pub fanout: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Background blur for NS foregrounds.
    #[arg(long, default_value_t = unimatte_core::datapipe::DEFAULT_BOKEH_SIGMA)]
    pub bokeh_sigma: f64,
    /// Random flips and crop-resize to the training size.
    #[arg(long)]
    pub augment: bool,
    #[command(flatten)]
    pub reps: RepOptions,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RepOptions {
    /// Foreground erosion radius for trimaps, in pixels.
    #[arg(long, default_value_t = unimatte_core::semantics::DEFAULT_RADIUS)]
    pub erode: usize,
    /// Background dilation radius for trimaps, in pixels.
    #[arg(long, default_value_t = unimatte_core::semantics::DEFAULT_RADIUS)]
    pub dilate: usize,
}

#[derive(Debug, Args)]
pub struct MakeRepsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub reps: RepOptions,
}

#[derive(Debug, Args)]
#[group(id = "weight-source", required = true, multiple = false, args = ["weights", "seed"])]
pub struct WeightSource {
    /// Weight store directory.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Use freshly initialised weights.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub source: WeightSource,
    /// Two scale factors in (0, 1]; fractions like `1/3` are accepted.
    #[arg(long, default_value = "1/3,1/4", value_parser = parse_scales)]
    pub scales: (f64, f64),
    /// Also write the decoded unified maps and spatial attention.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Md,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Predicted alphas named `<id>.png`.
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "md,csv,json")]
    pub format: Vec<Format>,
    /// Row label in the Markdown table.
    #[arg(long, default_value = "Ours")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Input side for the shape column.
    #[arg(long, default_value_t = 320)]
    pub size: usize,
    /// Input side for the MAC total.
    #[arg(long, default_value_t = 800)]
    pub mac_size: usize,
    /// Run a seeded forward pass and compare every traced shape.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    pub format: Format,
}

fn parse_factor(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("scale {s} not in (0, 1]"))
    }
}

pub fn parse_scales(s: &str) -> Result<(f64, f64), String> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] => Ok((parse_factor(a)?, parse_factor(b)?)),
        _ => Err(format!("expected two comma-separated scales, got `{s}`")),
    }
}
