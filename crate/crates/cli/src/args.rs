use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mudp_core::{ConjugationStrategy, Interpolant, InverseRealization, RhsMode, SolverConfig, VariationalMethod};

#[derive(Debug, Parser)]
#[command(name = "mudp", version, about = "Numerical lab for the periodic muDP equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the PDE in Eulerian form.
    Solve(RunArgs),
    /// Integrate the geodesic equations for (phi, xi).
    Geodesic(RunArgs),
    /// Time-one geodesic map, optionally with its Jacobian on a Fourier basis.
    Expmap(ExpmapArgs),
    /// Run the named invariant checks.
    Validate(ValidateArgs),
    /// Self-convergence study over a dt or n ladder.
    Converge(ConvergeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InitArgs {
    /// Initial datum as an expression in x, e.g. "0.2 + 0.05*cos(2*pi*x)".
    /// Defaults to that reference datum.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "fourier")]
    pub init: Option<String>,
    /// JSON file with a list of [k, cos_coeff, sin_coeff] triples.
    #[arg(long)]
    pub fourier: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsArg {
    Momentum,
    Transport,
    Quasilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Compose,
    Recursion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Trig,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InverseArg {
    Spectral,
    Closed,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 256, allow_negative_numbers = true)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = RhsArg::Momentum)]
    pub rhs: RhsArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Compose)]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = InterpArg::Trig)]
    pub interp: InterpArg,
    /// Realization of A^-1.
    #[arg(long, value_enum, default_value_t = InverseArg::Spectral)]
    pub inverse: InverseArg,
    /// 2/3-rule dealiasing of products.
    #[arg(long)]
    pub dealias: bool,
    /// Snapshot and monitor cadence in steps.
    #[arg(long, default_value_t = 1)]
    pub monitor_every: usize,
    /// Blow-up threshold on min phi_x.
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub slope_floor: f64,
    /// Blow-up threshold on sup |u_x|.
    #[arg(long, default_value_t = 1e3, allow_negative_numbers = true)]
    pub u_x_cap: f64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            n: self.n,
            dt: self.dt,
            t_end: self.t_end,
            rhs_mode: match self.rhs {
                RhsArg::Momentum => RhsMode::MomentumForm,
                RhsArg::Transport => RhsMode::TransportPlusP,
                RhsArg::Quasilinear => RhsMode::Quasilinear,
            },
            strategy: match self.strategy {
                StrategyArg::Compose => ConjugationStrategy::Compose,
                StrategyArg::Recursion => ConjugationStrategy::Recursion,
            },
            interpolant: match self.interp {
                InterpArg::Trig => Interpolant::Trig,
                InterpArg::Spline => Interpolant::Spline,
            },
            inverse: match self.inverse {
                InverseArg::Spectral => InverseRealization::Spectral,
                InverseArg::Closed => InverseRealization::Closed,
            },
            dealias: self.dealias,
            slope_floor: self.slope_floor,
            u_x_cap: self.u_x_cap,
            monitor_every: self.monitor_every,
            fault: 0.0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "mudp-out")]
    pub out: PathBuf,
    /// One row per snapshot instead of one row per (t, x).
    #[arg(long)]
    pub wide: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariationalArg {
    FiniteDifference,
    SensitivityOde,
}

impl From<VariationalArg> for VariationalMethod {
    fn from(v: VariationalArg) -> Self {
        match v {
            VariationalArg::FiniteDifference => VariationalMethod::FiniteDifference,
            VariationalArg::SensitivityOde => VariationalMethod::SensitivityOde,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExpmapArgs {
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fourier modes M of the Jacobian basis (2M+1 columns); 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub modes: usize,
    #[arg(long, value_enum, default_value_t = VariationalArg::FiniteDifference)]
    pub variational: VariationalArg,
    /// Central-difference step for the finite-difference variational method.
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Restrict to checks or groups (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Relative perturbation of A^-1, to confirm the checks can fail.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub inject_fault: f64,
    #[arg(long, default_value = "mudp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKindArg {
    Eulerian,
    Lagrangian,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "mudp-out")]
    pub out: PathBuf,
    /// Comma-separated time steps.
    #[arg(long, value_delimiter = ',', conflicts_with = "n_ladder", required_unless_present = "n_ladder")]
    pub dt_ladder: Vec<f64>,
    /// Comma-separated grid sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_ladder: Vec<usize>,
    #[arg(long = "solver", value_enum, default_value_t = SolverKindArg::Eulerian)]
    pub solver_kind: SolverKindArg,
}
