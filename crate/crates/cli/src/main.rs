//! Batch front end over the library: builds body documents, integrates
//! flows to CSV, and runs the entropy estimators, writing byte-reproducible
//! JSON artifacts (exit codes: 0 ok, 2 config, 3 geometry, 4 integration).

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Core(reeblab::Error),
    Config(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(reeblab::Error::Spec(_)) => 2,
            CliError::Core(reeblab::Error::Integration { .. }) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl From<reeblab::Error> for CliError {
    fn from(e: reeblab::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "reeblab",
    version,
    about = "Reeb flows on starshaped energy surfaces and torus geodesic flows: \
             build bodies, integrate, estimate entropy proxies"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build, compare, and health-check starshaped bodies.
    #[command(subcommand)]
    Body(BodyCmd),
    /// Integrate flows and tangent dynamics to CSV.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Entropy proxies: Lyapunov ensembles, separated sets, schedules.
    #[command(subcommand)]
    Entropy(EntropyCmd),
}

/// Flags shared by every leaf command.
#[derive(Args)]
struct OutArgs {
    /// Directory for artifacts.
    #[arg(long, env = "REEBLAB_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// File stem for artifacts (default is per-command).
    #[arg(long)]
    out: Option<String>,
    /// Also write a gnuplot script next to the plot CSV.
    #[arg(long)]
    plot: bool,
    /// JSON run-config supplying parameters; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BodyCmd {
    /// Write a body document (from a preset, a cube sharpness, or a polytope).
    Build {
        /// Sharpness p of the p-norm cube family.
        #[arg(long)]
        cube_p: Option<u32>,
        /// Named preset (ellipsoid, chaotic_demo, wobbly_sphere, cube_pN).
        #[arg(long)]
        preset: Option<String>,
        /// Halfspace-list document to smooth.
        #[arg(long)]
        polytope: Option<String>,
        /// Smoothing scheme: pnorm or log_sum_exp.
        #[arg(long)]
        scheme: Option<String>,
        /// Smoothing sharpness (p, or the log-sum-exp beta).
        #[arg(long)]
        sharpness: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sup-norm C0 (or convex C1) distance between two surfaces.
    Distance {
        /// First surface: file path or preset name.
        #[arg(long)]
        a: Option<String>,
        /// Second surface: file path or preset name.
        #[arg(long)]
        b: Option<String>,
        /// c0 (radial sup) or c1 (adds normal-direction gap; convex only).
        #[arg(long)]
        kind: Option<String>,
        /// Direction-grid resolution.
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Starshapedness, transversality, and derivative-consistency checks.
    Check {
        /// Body: file path or preset name.
        #[arg(long)]
        body: Option<String>,
        /// Number of sampled directions.
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Integrate the Reeb or Hamiltonian field from a surface point.
    Integrate(FlowArgs),
    /// Integrate the Hamiltonian field, then rewrite the time column in
    /// Reeb time using the co-integrated clock.
    Reparametrize(FlowArgs),
    /// Integrate the coupled state + tangent system and record stretching.
    Tangent(FlowArgs),
}

#[derive(Args)]
struct FlowArgs {
    /// Body: file path or preset name.
    #[arg(long)]
    body: Option<String>,
    /// reeb or hamiltonian.
    #[arg(long)]
    field: Option<String>,
    /// Integration horizon in the field's own time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Seed for the start point (and tangent vector) draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit start "x1,y1,x2,y2"; projected radially onto the surface.
    #[arg(long, value_parser = commands::parse_point, allow_hyphen_values = true)]
    start: Option<commands::Point>,
    /// Spacing of recorded CSV rows.
    #[arg(long)]
    sample_interval: Option<f64>,
    /// Relative step tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute step tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Tangent renormalization spacing (tangent runs).
    #[arg(long)]
    renorm_interval: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Subcommand)]
enum EntropyCmd {
    /// Lyapunov or separated-set estimate for one body.
    Estimate {
        /// Body: file path or preset name.
        #[arg(long)]
        body: Option<String>,
        /// reeb or hamiltonian.
        #[arg(long)]
        field: Option<String>,
        /// lyapunov or separated.
        #[arg(long)]
        method: Option<String>,
        /// Ensemble size.
        #[arg(long = "N")]
        ensemble: Option<usize>,
        /// Horizon per sample.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Separation radius (separated method).
        #[arg(long)]
        separation: Option<f64>,
        /// Snapshot count per orbit (separated method).
        #[arg(long)]
        segments: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Entropy along a smoothing schedule, with distances to the limit.
    Sequence {
        /// Halfspace-list document (or `cube`) to smooth along the schedule.
        #[arg(long)]
        polytope: Option<String>,
        /// Smoothing scheme: pnorm or log_sum_exp.
        #[arg(long)]
        scheme: Option<String>,
        /// Comma-separated sharpness schedule, strictly increasing.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
        /// Already-smooth body (file or preset) repeated as its own sequence.
        #[arg(long)]
        body: Option<String>,
        /// Member count for the constant sequence of a smooth body.
        #[arg(long)]
        members: Option<usize>,
        /// reeb or hamiltonian.
        #[arg(long)]
        field: Option<String>,
        #[arg(long = "N")]
        ensemble: Option<usize>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Lyapunov estimate for the geodesic flow of a conformal torus metric.
    Geodesic {
        /// Metric: file path or preset name (flat, bumpy_torus, rough).
        #[arg(long)]
        metric: Option<String>,
        #[arg(long = "N")]
        ensemble: Option<usize>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Body(cmd) => commands::run_body(cmd),
        Cmd::Flow(cmd) => commands::run_flow(cmd),
        Cmd::Entropy(cmd) => commands::run_entropy(cmd),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
