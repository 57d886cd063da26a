use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "girgs", version, about = "Sample geometric inhomogeneous and hyperbolic random graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a geometric inhomogeneous random graph.
    Girg(GirgArgs),
    /// Generate a hyperbolic random graph.
    Hrg(HrgArgs),
    /// Report the constant c (girg) or the disk radius R (hrg) for a target degree.
    Estimate(EstimateArgs),
    /// Compare a threshold hyperbolic graph with the threshold GIRGs of its mapped coordinates.
    Compare(CompareArgs),
    /// Per-step timings in nanoseconds per edge over parameter sweeps.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Girg,
    Hrg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Edgelist,
    Binary,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Number of vertices; `2^k` is accepted.
    #[arg(long, default_value = "32768", value_parser = parse_count)]
    pub n: usize,
    /// Temperature in [0, 1); 0 is the threshold variant.
    #[arg(long, default_value_t = 0.0)]
    pub temp: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the edges to this file.
    #[arg(long, value_name = "PATH")]
    pub edges_out: Option<PathBuf>,
    /// Write per-vertex coordinates to this file.
    #[arg(long, value_name = "PATH")]
    pub coords_out: Option<PathBuf>,
    /// Accumulate a checksum instead of storing the edges.
    #[arg(long, conflicts_with = "edges_out")]
    pub no_store: bool,
    #[arg(long, value_enum, default_value_t = Format::Edgelist)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GirgArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Dimension of the torus.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Power-law exponent of the weights, greater than 2.
    #[arg(long, default_value_t = 2.5)]
    pub ple: f64,
    /// Target expected average degree [default: 10].
    #[arg(long, conflicts_with = "constant")]
    pub deg: Option<f64>,
    /// Explicit connection constant c.
    #[arg(long = "const", id = "constant")]
    pub constant: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct HrgArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Radial dispersion; the degree exponent is 2 alpha + 1.
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Target expected average degree [default: 10].
    #[arg(long, conflicts_with = "offset")]
    pub deg: Option<f64>,
    /// Offset C of the disk radius R = 2 ln n + C.
    #[arg(long = "C", id = "offset", allow_negative_numbers = true)]
    pub offset: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value_t = Model::Girg)]
    pub model: Model,
    #[arg(long, default_value = "32768", value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.5)]
    pub ple: f64,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub temp: f64,
    #[arg(long, default_value_t = 10.0)]
    pub deg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = "4096", value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Target average degree of the hyperbolic graph [default: 100].
    #[arg(long, conflicts_with = "offset")]
    pub deg: Option<f64>,
    #[arg(long = "C", id = "offset", allow_negative_numbers = true)]
    pub offset: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Number of curve points evenly spaced in (0, c_super].
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Write the curve to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Model::Girg)]
    pub model: Model,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',', default_value = "32768", value_parser = parse_count)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub temp: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub deg: Vec<f64>,
    #[arg(long, default_value_t = 2.5)]
    pub ple: f64,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Repetitions per configuration, with consecutive seeds.
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Column separator.
    #[arg(long, default_value = "\t")]
    pub sep: String,
}

/// Accepts a decimal count or `2^k`.
fn parse_count(s: &str) -> Result<usize, String> {
    match s.split_once('^') {
        Some(("2", k)) => {
            let k: u32 = k.parse().map_err(|e| format!("bad exponent `{k}`: {e}"))?;
            1usize.checked_shl(k).filter(|_| k < usize::BITS).ok_or_else(|| format!("2^{k} is too large"))
        }
        Some(_) => Err(format!("only powers of two are accepted, got `{s}`")),
        None => s.parse().map_err(|e| format!("bad count `{s}`: {e}")),
    }
}
