//! `fqw`: generate fractal lattices, propagate walks and analyse transport regimes.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fqw_core::analysis::AnchorEvent;
use fqw_core::{Error, InputSelector, LatticeKind};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown flag, missing or invalid argument)
  3  i/o failure
  4  malformed input file
  5  dimension mismatch between inputs
  6  parameter outside its domain or range
  7  numerical failure
  8  required landmark or event not found

Relative output paths are resolved against $OUTPUT_DIR when it is set.";

#[derive(Parser)]
#[command(name = "fqw", version, about = "Continuous-time quantum walks on fractal lattices", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a lattice document (optionally dump its Hamiltonian)
    Lattice(LatticeArgs),
    /// Propagate a quantum walk from one input site
    Evolve(EvolveArgs),
    /// Propagate the classical continuous-time random walk
    Classical(ClassicalArgs),
    /// Export variance, return probability and Pólya number as CSV
    Observables(ObservablesArgs),
    /// Detect regimes and fit scaling exponents
    Analyze(AnalyzeArgs),
    /// Render occupation patterns as 16-bit PGM frames
    Render(RenderArgs),
    /// Convert report event times to propagation lengths
    Calibrate(CalibrateArgs),
    /// Run the full pipeline over a grid of lattice kinds and sizes
    Sweep(SweepArgs),
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long)]
    kind: LatticeKind,
    /// Generation for fractals, rows (triangle) or side (square) for regular lattices
    #[arg(long, alias = "size")]
    generation: u32,
    #[arg(long)]
    out: PathBuf,
    /// Also write the Hamiltonian as 0-indexed `row col value` triplets
    #[arg(long)]
    hamiltonian_dump: Option<PathBuf>,
    #[command(flatten)]
    couplings: CouplingArgs,
}

#[derive(Args, Clone, Copy)]
struct CouplingArgs {
    /// On-site propagation constant
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    /// Nearest-neighbour coupling; time is measured in units of its inverse
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    coupling: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GridKind {
    /// `steps` points uniformly on [0, tau-max]
    Uniform,
    /// `steps` points log-spaced on [tau-min, tau-max]
    Log,
    /// The recorded propagation lengths of the lattice family, scaled by mm-per-tau
    Measured,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, value_enum, default_value_t = GridKind::Uniform)]
    grid: GridKind,
    #[arg(long, default_value_t = 25.0)]
    tau_max: f64,
    #[arg(long, default_value_t = 1e-2)]
    tau_min: f64,
    #[arg(long, default_value_t = 501)]
    steps: usize,
    #[arg(long, default_value_t = fqw_core::analysis::DEFAULT_MM_PER_TAU)]
    mm_per_tau: f64,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    lattice: PathBuf,
    /// apex, corner, canonical or a site id (`17` or `id:17`)
    #[arg(long, default_value = "canonical")]
    input: InputSelector,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    couplings: CouplingArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write a compact little-endian binary dump of the probabilities
    #[arg(long)]
    binary: Option<PathBuf>,
}

#[derive(Args)]
struct ClassicalArgs {
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long, default_value = "canonical")]
    input: InputSelector,
    #[command(flatten)]
    grid: GridArgs,
    /// Hopping rate of the random walk
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    rate: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ObservablesArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct RegimeArgs {
    /// Probability on a landmark set that marks arrival
    #[arg(long, default_value_t = 0.02)]
    epsilon: f64,
    /// Half-width of the band around the fractal dimension
    #[arg(long, default_value_t = 0.15)]
    band: f64,
    /// Samples per local-exponent window (odd, >= 5)
    #[arg(long, default_value_t = 11)]
    slope_window: usize,
    /// Pólya plateau tolerance
    #[arg(long, default_value_t = 0.002)]
    delta: f64,
    /// Minimum plateau length in samples
    #[arg(long, default_value_t = 5)]
    min_span: usize,
}

#[derive(Args, Clone, Copy)]
struct AnchorArgs {
    /// Event tied to a measured length: first-void or farthest
    #[arg(long, requires = "anchor_mm")]
    anchor_event: Option<AnchorEvent>,
    /// Propagation length of the anchor event in mm
    #[arg(long, requires = "anchor_event")]
    anchor_mm: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    lattice: PathBuf,
    #[command(flatten)]
    regime: RegimeArgs,
    #[command(flatten)]
    anchor: AnchorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct RenderSpecArgs {
    #[arg(long, default_value_t = 24)]
    pixels_per_spacing: u32,
    /// Spot width in lattice spacings
    #[arg(long, default_value_t = 0.35)]
    spot_sigma: f64,
    /// Border in lattice spacings
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    lattice: PathBuf,
    /// Time indices to render; all time points when omitted
    #[arg(long, value_delimiter = ',')]
    time_index: Vec<usize>,
    /// Frame name prefix: frames are `<run>_t<index>.pgm`
    #[arg(long, default_value = "frame")]
    run: String,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    spec: RenderSpecArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    anchor_event: AnchorEvent,
    #[arg(long)]
    anchor_mm: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "sg,sc,dsc")]
    kinds: Vec<LatticeKind>,
    /// Generations (rows/side for regular kinds), applied to every kind
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    generations: Vec<u32>,
    #[arg(long, default_value = "canonical")]
    input: InputSelector,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    couplings: CouplingArgs,
    #[command(flatten)]
    regime: RegimeArgs,
    /// Evenly spaced frames rendered per instance
    #[arg(long, default_value_t = 0)]
    frames: usize,
    #[command(flatten)]
    spec: RenderSpecArgs,
    /// Run name recorded in the manifest
    #[arg(long, default_value = "sweep")]
    run: String,
    #[arg(long)]
    out_dir: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Malformed(_) | Error::Json(_) => 4,
        Error::Shape(_) => 5,
        Error::Domain(_) | Error::Bounds { .. } => 6,
        Error::Numerical(_) => 7,
        Error::NotFound(_) | Error::Structural(_) => 8,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fqw: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
