use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exit status of a usage error (bad flags, missing inputs, bad config).
const EXIT_USAGE: u8 = 2;
/// Exit status when processing ran but something failed.
const EXIT_FAILURE: u8 = 1;

/// Synthesize fisheye images and label maps from rectilinear datasets.
#[derive(Parser, Debug)]
#[command(name = "fisheye-synth", version, about, long_about = None)]
struct Cli {
    /// Worker threads; 0 uses every core. Never changes output bytes.
    #[arg(long, global = true, env = "FISHEYE_SYNTH_WORKERS", default_value_t = 0)]
    workers: usize,

    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a split into fixed-focal-length fisheye test sets.
    GenTestset(GenTestsetArgs),
    /// Write randomly augmented pairs with per-sample provenance.
    Augment(AugmentArgs),
    /// Render a grid of per-DoF perturbations or random samples of one image.
    Preview(PreviewArgs),
    /// Score predictions against generated test sets.
    Eval(EvalArgs),
    /// Report the coverage and statistics of one warp.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Dataset root in the Cityscapes layout.
    #[arg(long)]
    root: PathBuf,

    #[arg(long, default_value = "val")]
    split: String,

    /// Raw-to-train-ID table (`raw train` per line); defaults to Cityscapes.
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PolicyArgs {
    /// Bundled preset name.
    #[arg(long, conflicts_with = "policy")]
    preset: Option<String>,

    /// Policy TOML file.
    #[arg(long)]
    policy: Option<PathBuf>,

    /// Overrides the seed stored in the policy.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenTestsetArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    /// Fisheye focal lengths, one test set each.
    #[arg(long, value_delimiter = ',', default_values_t = [200.0, 250.0, 300.0, 350.0, 400.0])]
    f: Vec<f64>,

    /// Output directory; test sets go to `<out>/f<f>`.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 640)]
    out_size: u32,

    #[arg(long, default_value_t = 500.0)]
    z1: f64,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    #[command(flatten)]
    policy: PolicyArgs,

    /// Number of samples; defaults to one epoch.
    #[arg(long)]
    count: Option<usize>,

    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GridKind {
    /// 12 pose tiles followed by a focal sweep.
    Dof,
    /// Random draws from the policy.
    Samples,
}

#[derive(Args, Debug)]
struct PreviewArgs {
    #[arg(long)]
    image: PathBuf,

    /// Train-ID label map of the image; adds a colorized label grid.
    #[arg(long)]
    label: Option<PathBuf>,

    #[command(flatten)]
    policy: PolicyArgs,

    #[arg(long, value_enum, default_value_t = GridKind::Dof)]
    grid: GridKind,

    /// Tiles in a `samples` grid.
    #[arg(long, default_value_t = 16)]
    tiles: usize,

    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Prediction root holding `f<f>` directories.
    #[arg(long)]
    pred: PathBuf,

    /// Ground-truth root as written by `gen-testset`.
    #[arg(long)]
    gt: PathBuf,

    #[arg(long, value_delimiter = ',', default_values_t = [200.0, 250.0, 300.0, 350.0, 400.0])]
    f: Vec<f64>,

    /// Row label in the table.
    #[arg(long, default_value = "predictions")]
    method: String,

    /// JSON report path; defaults to `<pred>/eval.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Take the central warp of a policy file instead of explicit parameters.
    #[arg(long, conflicts_with_all = ["f", "rot_x", "rot_y", "rot_z", "t_x", "t_y", "t_z", "out_size", "z1"])]
    policy: Option<PathBuf>,

    #[arg(long, default_value_t = 300.0)]
    f: f64,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rot_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rot_y: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rot_z: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t_y: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t_z: f64,

    #[arg(long, default_value_t = 640)]
    out_size: u32,

    #[arg(long, default_value_t = 500.0)]
    z1: f64,

    /// Source raster as `COLSxROWS`.
    #[arg(long, default_value = "2048x1024")]
    src: String,

    /// Write the table in the binary remap format.
    #[arg(long)]
    dump: Option<PathBuf>,
}

/// A failed run, split by exit status.
#[derive(Debug)]
enum CliError {
    Usage(anyhow::Error),
    Failure(anyhow::Error),
}

impl From<fisheye_synth::Error> for CliError {
    fn from(e: fisheye_synth::Error) -> Self {
        use fisheye_synth::Error as E;
        match e {
            E::UnknownPreset(_) | E::PolicyParse(_) | E::Config(_) | E::MissingFocal { .. } => {
                CliError::Usage(e.into())
            }
            other => CliError::Failure(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let quiet = cli.quiet;
    let result = pool.install(|| match cli.command {
        Command::GenTestset(a) => commands::gen_testset(a, quiet),
        Command::Augment(a) => commands::augment(a, quiet),
        Command::Preview(a) => commands::preview(a, quiet),
        Command::Eval(a) => commands::eval(a, quiet),
        Command::Inspect(a) => commands::inspect(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
