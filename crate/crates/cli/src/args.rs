use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dtagn_core::config::KeyValues;
use dtagn_core::Real;

#[derive(Debug, Parser)]
#[command(name = "dtagn", version, about = "Two-stream facial expression recognition from frames and landmarks")]
pub struct Cli {
    /// key=value file whose entries act as default flags (`epochs=20` is `--epochs 20`).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a raw dataset and write a prepared cache.
    #[command(subcommand)]
    Prepare(Prepare),
    /// Train one network on a prepared cache.
    Train(TrainArgs),
    /// Evaluate a saved model on a prepared cache.
    Eval(EvalArgs),
    /// Fuse the scores of an appearance and a geometry model.
    Fuse(FuseArgs),
    /// Subject-independent k-fold protocol for both networks and their fusion.
    Crossval(CrossvalArgs),
    /// Export filters, feature maps, landmark rankings or activations.
    #[command(subcommand)]
    Inspect(Inspect),
}

#[derive(Debug, Subcommand)]
pub enum Prepare {
    /// Landmark CSV plus layout file into a normalized landmark cache.
    Geometry(PrepareGeometry),
    /// Image manifest plus PGM frames into a key-frame cache.
    Appearance(PrepareAppearance),
}

#[derive(Debug, Args)]
pub struct Seed {
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PrepareGeometry {
    /// Rows of `sequence_id,subject_id,label,frame_index,x1,y1,...,xn,yn`.
    #[arg(long)]
    pub landmarks: PathBuf,
    /// key=value file with `points`, `frames`, `nose` and optional `mirror`.
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemporalMode {
    /// Resample to 12 frames.
    Standard,
    /// Resample to 24 frames and keep the first 12.
    FrontHalf,
}

#[derive(Debug, Args)]
pub struct PrepareAppearance {
    /// CSV `sequence_id,subject_id,label,frame_count,dir`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = TemporalMode::Standard)]
    pub mode: TemporalMode,
    /// 1-based frames kept after resampling.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 7, 12])]
    pub key_frames: Vec<usize>,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args, Clone)]
pub struct Hyper {
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: Real,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: Real,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: Real,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Standard deviation of the Gaussian weight initialization.
    #[arg(long, default_value_t = 0.01)]
    pub init_std: Real,
    /// Floor of the local contrast normalization divisor.
    #[arg(long, default_value_t = 1.0)]
    pub lcn_floor: Real,
}

#[derive(Debug, Args, Clone)]
pub struct AugmentArgs {
    /// Train on the original sequences only.
    #[arg(long)]
    pub no_augment: bool,
    /// Landmark noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: Real,
    /// Landmark rotation range in radians, `low,high`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true,
          default_values_t = [-std::f64::consts::PI as Real / 10.0, std::f64::consts::PI as Real / 10.0])]
    pub rotation: Vec<Real>,
    /// Image rotation angles in degrees.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true,
          default_values_t = [-15.0, -10.0, -5.0, 5.0, 10.0, 15.0])]
    pub angles: Vec<Real>,
}

#[derive(Debug, Args, Clone)]
pub struct FoldArgs {
    /// Number of subject-grouped folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Restrict to one fold: `train` leaves it out, `eval`/`fuse` score only it.
    #[arg(long)]
    pub fold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Architecture string, e.g. `D1176-FC100-FC600-S7`.
    #[arg(long)]
    pub arch: String,
    /// Dropout rates: input first, then after each hidden dense layer.
    #[arg(long, value_delimiter = ',')]
    pub dropout: Vec<Real>,
    #[command(flatten)]
    pub hyper: Hyper,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[command(flatten)]
    pub folds: FoldArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log; defaults to the model path with `.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory for CSV reports and the text summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated class names for reports.
    #[arg(long, value_delimiter = ',')]
    pub class_names: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    #[command(flatten)]
    pub folds: FoldArgs,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub appearance_model: PathBuf,
    #[arg(long)]
    pub appearance_cache: PathBuf,
    #[arg(long)]
    pub geometry_model: PathBuf,
    #[arg(long)]
    pub geometry_cache: PathBuf,
    /// Weight of the appearance scores.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: Real,
    #[command(flatten)]
    pub folds: FoldArgs,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub geometry_cache: Option<PathBuf>,
    #[arg(long)]
    pub appearance_cache: Option<PathBuf>,
    #[arg(long)]
    pub geometry_arch: Option<String>,
    #[arg(long)]
    pub appearance_arch: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub geometry_dropout: Vec<Real>,
    #[arg(long, value_delimiter = ',')]
    pub appearance_dropout: Vec<Real>,
    /// Overrides `--epochs` for the geometry network.
    #[arg(long)]
    pub geometry_epochs: Option<usize>,
    /// Overrides `--epochs` for the appearance network.
    #[arg(long)]
    pub appearance_epochs: Option<usize>,
    #[command(flatten)]
    pub hyper: Hyper,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Weight of the appearance scores.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: Real,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Output directory for models, logs and reports.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub class_names: Vec<String>,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Subcommand)]
pub enum Inspect {
    /// Render first-layer temporal filters as PGM tiles.
    Filters(InspectFilters),
    /// Export one input's feature maps at a spatial layer.
    Maps(InspectMaps),
    /// Rank landmarks by mean absolute first-layer weight.
    Landmarks(InspectLandmarks),
    /// Export hidden-layer activations as CSV.
    Activations(InspectActivations),
}

#[derive(Debug, Args)]
pub struct InspectFilters {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct InspectMaps {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    /// Sequence to feed; the first in the cache by default.
    #[arg(long)]
    pub sequence: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct InspectLandmarks {
    #[arg(long)]
    pub model: PathBuf,
    /// Landmark cache supplying the layout; otherwise `--points`/`--frames`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, default_value_t = 49)]
    pub points: usize,
    #[arg(long, default_value_t = 12)]
    pub frames: usize,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Optional CSV of `rank,point,score`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub seed: Seed,
}

#[derive(Debug, Args)]
pub struct InspectActivations {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub layer: usize,
    /// Include the augmented copies of every sequence.
    #[arg(long)]
    pub augment: bool,
    #[command(flatten)]
    pub augment_settings: AugmentArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: Seed,
}

fn override_self(cmd: clap::Command) -> clap::Command {
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let mut cmd = cmd.args_override_self(true);
    for name in names {
        cmd = cmd.mut_subcommand(name, override_self);
    }
    cmd
}

/// The clap command with repeated flags resolving to the last occurrence.
pub fn command() -> clap::Command {
    override_self(<Cli as clap::CommandFactory>::command())
}

/// Finds `--config FILE` (or `--config=FILE`) in raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Converts config entries to flags. `true`/`false` toggle switches.
pub fn config_flags(kv: &KeyValues) -> Vec<OsString> {
    let mut out = Vec::new();
    for (key, value) in kv.iter() {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            "true" => out.push(flag.into()),
            "false" => {}
            _ => {
                out.push(flag.into());
                out.push(value.into());
            }
        }
    }
    out
}

/// Splices config-file flags in front of the first user flag, so flags given
/// on the command line win.
pub fn expand_config(args: Vec<OsString>) -> dtagn_core::Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let injected = config_flags(&KeyValues::load(Path::new(&path))?);
    // First flag after the subcommand words, ignoring `--config` itself.
    let mut at = args.len();
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if s.starts_with('-') && !s.starts_with("--config=") {
            at = i;
            break;
        }
        i += 1;
    }
    let mut out = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
