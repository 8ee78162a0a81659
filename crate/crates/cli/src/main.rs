//! `tpvm` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric or invariant
//! failure. Diagnostics go to stderr; JSON results go to stdout.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "tpvm",
    version,
    about = "Atom-frame factorization and fusion simulation for temporal psychovisual modulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factorize target images into atom frames and viewer weights.
    Factorize(FactorizeArgs),
    /// Hide a secret image behind a noise normal view (two atom frames).
    Covert(CovertArgs),
    /// Design a default view plus an annotated shale view (two atom frames).
    Dual(DualArgs),
    /// Render what a viewer perceives from a bundle.
    Perceive(PerceiveArgs),
    /// Attach a spatial modulation mask to a bundle.
    Mask(MaskArgs),
    /// Print a quality report (JSON) for a bundle against its targets.
    Metrics(MetricsArgs),
    /// Export a bundle as JSON for the browser explorer.
    ExportUi(ExportUiArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum alternating passes per run.
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    init: InitArg,
    /// Run the kernels on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum InitArg {
    Uniform,
    Replicate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    Sum,
    Mean,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ChannelArg {
    R,
    G,
    B,
}

#[derive(Args, Debug)]
struct FactorizeArgs {
    /// Target images (PGM/PPM), or a single directory whose images are taken in name order.
    #[arg(long, num_args = 1.., required = true)]
    targets: Vec<PathBuf>,
    /// Number of atom frames M.
    #[arg(long)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
    /// Treat the first target as the unaided view: its weights are pinned to 1.
    #[arg(long)]
    pin_normal_view: bool,
    /// Fusion mode recorded in the bundle.
    #[arg(long, value_enum, default_value_t = ModeArg::Sum)]
    mode: ModeArg,
    /// Channel to use from color (P6) inputs.
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct CovertArgs {
    #[arg(long)]
    secret: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
}

#[derive(Args, Debug)]
struct DualArgs {
    /// Image seen with unaided eyes.
    #[arg(long = "default")]
    default_view: PathBuf,
    /// Image seen through the modulated glasses.
    #[arg(long)]
    shale: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Let the solver choose the shale weights instead of fixing them to (1, 0).
    #[arg(long)]
    free_shale: bool,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("view").required(true).args(["viewer", "weights", "mask_from", "normal"])))]
struct PerceiveArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Use column k of the bundle's weight matrix.
    #[arg(long)]
    viewer: Option<usize>,
    /// Explicit comma-separated weights, one per atom frame.
    #[arg(long, allow_hyphen_values = true)]
    weights: Option<String>,
    /// Use the spatial mask stored in this bundle.
    #[arg(long)]
    mask_from: Option<PathBuf>,
    /// All weights 1 (unaided view).
    #[arg(long)]
    normal: bool,
    /// Override the bundle's fusion mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// PGM maxval of the output (255 or 65535).
    #[arg(long, default_value_t = 255)]
    maxval: u16,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[command(subcommand)]
    kind: MaskKind,
}

#[derive(Subcommand, Debug)]
enum MaskKind {
    /// Inner/outer partition with one weight vector each.
    Region {
        #[command(flatten)]
        io: MaskIo,
        /// Disk "cx,cy,radius".
        #[arg(long, conflicts_with = "rect", required_unless_present = "rect")]
        disk: Option<String>,
        /// Rectangle "x0,y0,x1,y1" (inclusive pixel centers).
        #[arg(long)]
        rect: Option<String>,
        #[arg(long)]
        inner: String,
        #[arg(long)]
        outer: String,
    },
    /// One-hot rings around a center, one slice per ring.
    Concentric {
        #[command(flatten)]
        io: MaskIo,
        /// Center "cx,cy".
        #[arg(long)]
        center: String,
        /// Strictly ascending ring radii, one per atom frame.
        #[arg(long)]
        radii: String,
        /// Outermost ring shows the first slice.
        #[arg(long)]
        reversed: bool,
    },
    /// The same blend weights at every pixel.
    Alpha {
        #[command(flatten)]
        io: MaskIo,
        #[arg(long)]
        alphas: String,
    },
}

#[derive(Args, Debug)]
struct MaskIo {
    /// Bundle providing dimensions and atom frames.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    targets: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
}

#[derive(Args, Debug)]
struct ExportUiArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Output directory; the document is written to `<out>/bundle.json`.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<tpvm::Error> for CliError {
    fn from(e: tpvm::Error) -> Self {
        match e {
            tpvm::Error::DimensionMismatch(_) | tpvm::Error::InvalidConfig(_) => CliError::usage(e.to_string()),
            tpvm::Error::OutOfRange(_) => CliError::numeric(e.to_string()),
        }
    }
}

impl From<tpvm::io::ImageError> for CliError {
    fn from(e: tpvm::io::ImageError) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<tpvm::io::BundleError> for CliError {
    fn from(e: tpvm::io::BundleError) -> Self {
        match e {
            tpvm::io::BundleError::Invariant(_) => CliError::numeric(e.to_string()),
            _ => CliError::io(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Factorize(a) => commands::factorize(a),
        Command::Covert(a) => commands::covert(a),
        Command::Dual(a) => commands::dual(a),
        Command::Perceive(a) => commands::perceive(a),
        Command::Mask(a) => commands::mask(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::ExportUi(a) => commands::export_ui(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tpvm: {e}");
            ExitCode::from(e.code)
        }
    }
}
