//! `pcae`: synthesize data, train linear autoencoders, recover loading vectors
//! and compare them with a reference PCA.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcae_core::analysis::WeightSource;
use pcae_core::autoencoder::TrainConfig;
use pcae_core::io::Orientation;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "pcae", version, about = "PCA through linear autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw Gaussian data with a planted spectrum.
    Synth(SynthArgs),
    /// Train a linear autoencoder.
    Train(TrainArgs),
    /// Recover loading vectors from trained weights.
    Recover(RecoverArgs),
    /// Reference PCA by eigendecomposition of the scatter matrix.
    Oracle(OracleArgs),
    /// Diagnostics for a model against a dataset.
    Report(ReportArgs),
    /// Render vectors or images as a PGM grid.
    Render(RenderArgs),
}

#[derive(Args, Debug, Clone)]
struct OutArg {
    /// Output directory; falls back to $PCAE_OUT_DIR.
    #[arg(long, env = "PCAE_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// IDX3 image file, PCAE matrix (one observation per column) or CSV.
    #[arg(long)]
    data: PathBuf,
    /// How CSV input maps to observations.
    #[arg(long, value_enum, default_value_t = CsvLayout::Rows)]
    csv_layout: CsvLayout,
    /// Keep only the first N observations.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CsvLayout {
    /// One observation per row.
    Rows,
    /// One observation per column.
    Columns,
}

impl From<CsvLayout> for Orientation {
    fn from(l: CsvLayout) -> Self {
        match l {
            CsvLayout::Rows => Orientation::RowsAreObservations,
            CsvLayout::Columns => Orientation::ColumnsAreObservations,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    W2,
    W1,
}

impl From<Source> for WeightSource {
    fn from(s: Source) -> Self {
        match s {
            Source::W2 => WeightSource::W2,
            Source::W1 => WeightSource::W1,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RenderOpts {
    /// Write a PGM grid of the loading vectors.
    #[arg(long)]
    render: bool,
    /// Tile shape as HxW; defaults to the image shape of IDX input.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<(usize, usize)>,
    /// Tiles per grid row.
    #[arg(long, default_value_t = 4)]
    grid_cols: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Observation dimension.
    #[arg(long)]
    n: usize,
    /// Number of observations.
    #[arg(long)]
    count: usize,
    /// Comma-separated standard deviations, strictly descending, one per dimension.
    #[arg(long, value_delimiter = ',', required = true)]
    stds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a fixed mean of this Euclidean norm (alternating signs).
    #[arg(long, default_value_t = 0.0)]
    shift_norm: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Hidden width.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            weight_decay: self.wd.unwrap_or(d.weight_decay),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            seed: self.seed.unwrap_or(d.seed),
            init_scale: self.init_scale.unwrap_or(d.init_scale),
            ..d
        }
    }
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// Directory holding w1/b1/w2/b2 .pcae files.
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Number of loading vectors; defaults to the hidden width.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value_t = Source::W2)]
    source: Source,
    #[command(flatten)]
    render: RenderOpts,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    render: RenderOpts,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Model directory written by `recover` or `oracle`.
    #[arg(long, required_unless_present = "no_svd")]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Trained weights; adds the pseudoinverse residual.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Reference model for principal angles (e.g. an oracle run).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Score through the raw W2 instead of the recovered basis.
    #[arg(long, requires = "params")]
    no_svd: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Model directory whose loading vectors are drawn.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    model: Option<PathBuf>,
    /// Dataset whose first `count` observations are drawn.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, value_parser = parse_shape)]
    shape: Option<(usize, usize)>,
    #[arg(long, default_value_t = 4)]
    grid_cols: usize,
    #[command(flatten)]
    out: OutArg,
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(h)?, parse(w)?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Recover(a) => commands::recover(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Report(a) => commands::report(a),
        Command::Render(a) => commands::render(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
