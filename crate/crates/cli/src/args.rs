use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mtom", version, about = "Rate-adaptive constellation shaping with dummy bits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an autoencoder and export its constellation.
    Train(TrainArgs),
    /// Per-bit GMI of a LUT over an SNR or span grid.
    Eval(EvalArgs),
    /// Ideal-FEC reach over a dummy-bit sweep.
    Sweep(SweepArgs),
    /// LDPC-coded BER of a LUT at a set of operating points.
    Chain(ChainArgs),
    /// Write BRGC square-QAM reference LUTs.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training configuration (`mtom-train-v1` TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exactly one of `--snr-db` (AWGN) or `--spans` (fiber link).
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct OperatingGrid {
    /// SNR grid in dB, e.g. `5,10,15` or `10:0.5:13`.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Span-count grid, e.g. `1:30`.
    #[arg(long)]
    pub spans: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Constellation LUT (`mtom-lut-v1` JSON).
    #[arg(long)]
    pub lut: PathBuf,
    /// Channel configuration for span grids; the reference link by default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub grid: OperatingGrid,
    /// Dummy bits excluded from the total GMI.
    #[arg(long, default_value_t = 0.0)]
    pub nd: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo symbols per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub symbols: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep configuration (`mtom-sweep-v1` TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory holding `nd<k>.lut.json` for every cell the plan touches.
    #[arg(long)]
    pub lut: PathBuf,
    /// Channel configuration; overrides the one named in the sweep file.
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Parity-check matrix in alist format; the bundled rate-5/6 code by
    /// default.
    #[arg(long)]
    pub code: Option<PathBuf>,
    #[arg(long)]
    pub lut: PathBuf,
    /// Channel configuration for span grids; the reference link by default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub grid: OperatingGrid,
    #[arg(long, default_value_t = 0.0)]
    pub nd: f64,
    /// Frames per operating point; raised if fewer than 10⁶ information
    /// bits would result.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long = "max-iters", default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Bits per symbol; all of 2, 4, 6 and 8 when omitted.
    #[arg(long)]
    pub m: Option<usize>,
    /// Labeling family; only `brgc` is available.
    #[arg(long, default_value = "brgc")]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
}
