use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pfdyn", version, about = "Differential iterations of polynomial vector fields")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "PFDYN_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum Command {
    /// Equilibria, spectra, classification and fault directions.
    Analyze(AnalyzeArgs),
    /// Iterate from a start point and write the orbit as CSV.
    Simulate(SimulateArgs),
    /// Critical points of the Plancherel-Rotach functional and the resolvent gap.
    Saddle(SaddleArgs),
    /// Hermite zeros, Gauss-Hermite weights and limiting-law tests.
    Hermite(HermiteArgs),
    /// Ulam estimate of the invariant density.
    Ulam(UlamArgs),
    /// Lorenz case study.
    Lorenz(LorenzArgs),
    /// First-visit times of the cells of a grid.
    Doorstep(DoorstepArgs),
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Simulate(_) => "simulate",
            Command::Saddle(_) => "saddle",
            Command::Hermite(_) => "hermite",
            Command::Ulam(_) => "ulam",
            Command::Lorenz(_) => "lorenz",
            Command::Doorstep(_) => "doorstep",
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SystemArgs {
    /// Builtin system (lorenz, logistic, harmonic) or path to a JSON definition.
    #[arg(long)]
    pub system: String,

    /// Parameter override NAME=VALUE, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,

    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,

    /// Step per time variable; one value is shared by all.
    #[arg(long, default_value = "0.005", allow_hyphen_values = true)]
    pub delta: String,

    /// Direction weights of the time variables (default: the system's, else uniform).
    #[arg(long)]
    pub tau: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Search box "lo,hi;lo,hi;..." (default: the builtin's box).
    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,

    /// Newton starts per axis.
    #[arg(long)]
    pub grid: Option<usize>,

    /// Report path (default: stdout).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long)]
    pub steps: usize,

    #[arg(long, allow_hyphen_values = true)]
    pub start: String,

    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,

    /// Closure tolerance for cycle detection (default: 10 delta max(1, |start|)).
    #[arg(long)]
    pub cycle_tol: Option<f64>,

    /// Orbit CSV: step, a_1..a_d.
    #[arg(long, default_value = "orbit.csv")]
    pub out: String,

    /// Report path (default: stdout).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SaddleArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Covector y, one entry per coordinate.
    #[arg(long, allow_hyphen_values = true)]
    pub y: String,

    /// Multi-index n, one positive entry per coordinate.
    #[arg(long)]
    pub n: String,

    /// Complex Newton starts.
    #[arg(long, default_value_t = 64)]
    pub starts: usize,

    /// Point at which the Hessian of y.F is taken (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,

    /// Report path (default: stdout).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingArg {
    ByLargestZero,
    BySqrt2n,
}

#[derive(Debug, Args, Serialize)]
pub struct HermiteArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,

    /// Zeros CSV: index, zero, weight.
    #[arg(long, default_value = "zeros.csv")]
    pub out: String,

    /// Limiting-law comparison JSON (needs n >= 10).
    #[arg(long)]
    pub laws: Option<String>,

    /// Report path (default: stdout).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Discard,
    Absorbing,
}

#[derive(Debug, Args, Serialize)]
pub struct UlamArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,

    /// Cells per axis; one value is shared by all axes.
    #[arg(long, default_value = "64")]
    pub cells: String,

    /// Samples per cell.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,

    #[arg(long, value_enum, default_value = "discard")]
    pub policy: PolicyArg,

    /// Power-iteration tolerance on |wP - w|_1.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,

    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,

    /// Density file (little-endian, see README).
    #[arg(long, default_value = "density.bin")]
    pub out: String,

    /// Marginals CSV: axis, cell, center, mass.
    #[arg(long, default_value = "marginals.csv")]
    pub marginals: String,

    /// Report path (default: stdout).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct LorenzArgs {
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 28.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 8.0 / 3.0)]
    pub beta: f64,

    #[arg(long, default_value_t = 0.005)]
    pub delta: f64,

    #[arg(long, default_value_t = 2_000_000)]
    pub steps: usize,

    /// Steps dropped before statistics (default: a tenth of the steps).
    #[arg(long)]
    pub burn_in: Option<usize>,

    #[arg(long, default_value = "1,1,1", allow_hyphen_values = true)]
    pub start: String,

    /// Covector (r, s, t); normalized before use.
    #[arg(long, default_value = "0,1,1", allow_hyphen_values = true)]
    pub covector: String,

    /// Half-thickness of the slab around the plane c = r + s rho.
    #[arg(long, default_value_t = 0.5)]
    pub slab: f64,

    /// Degree of the Hermite polynomial indexing the ovals.
    #[arg(long, default_value_t = 100)]
    pub hermite_n: usize,

    /// Orders n of the resolvent-gap comparison.
    #[arg(long, default_value = "2,4,6,8")]
    pub gap_orders: String,

    /// Also scan 64 covectors over the positive octant.
    #[arg(long)]
    pub sweep: bool,

    #[arg(long = "box", default_value = "-30,30;-30,30;0,60", allow_hyphen_values = true)]
    pub region: String,

    /// Report path (default: stdout).
    #[arg(long)]
    pub report: Option<String>,

    /// Oval CSV: family, index, chi, radius.
    #[arg(long)]
    pub csv: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct DoorstepArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,

    #[arg(long, default_value = "10")]
    pub cells: String,

    #[arg(long, allow_hyphen_values = true)]
    pub start: String,

    #[arg(long, default_value_t = 1_000_000)]
    pub horizon: u64,

    /// First-visit CSV: cell, first_visit_step (empty if never).
    #[arg(long)]
    pub out: Option<String>,

    /// Report path (default: stdout).
    #[arg(long)]
    pub report: Option<String>,
}
