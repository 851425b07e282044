use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use mudp_core::flows::{solve_eulerian, solve_lagrangian};
use mudp_core::grid::{nodes, DEFAULT_INVERSION_TOL, DEFAULT_SLOPE_FLOOR};
use mudp_core::operators::DEFAULT_QUADRATURE_REFINEMENT;
use mudp_core::validate::{run_validation, Check, ValidateOptions};
use mudp_core::expmap::{exp_map, jacobian_expmap};
use mudp_core::{Error as CoreError, SolverConfig, Termination, VariationalOptions};
use serde::Serialize;

use crate::args::{ConvergeArgs, ExpmapArgs, InitArgs, RunArgs, SolverKindArg, ValidateArgs};
use crate::converge::{run_ladder, ConvergeReport, Ladder, LadderStopped, SolverKind, DAT_HEADER};
use crate::input::{InitSource, InitialData};
use crate::output::{csv_writer, ensure_dir, fmt_f64, write_dat, write_eulerian, write_json, write_lagrangian, write_monitors, FileLog, Layout};

pub const EXIT_OK: u8 = 0;
/// I/O and other unexpected errors.
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BLOWUP: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;

/// An error together with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_CONFIG, error: error.into() }
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_ERROR, error: error.into() }
    }
}

/// Rewrites a core configuration error in terms of the flag that set it.
fn config_error(e: CoreError) -> Failure {
    match e {
        CoreError::InvalidConfig { field, reason } => {
            Failure::config(anyhow::anyhow!("invalid --{}: {reason}", field.replace('_', "-")))
        }
        other => Failure::config(other),
    }
}

fn load_init(args: &InitArgs) -> Result<InitialData, Failure> {
    match (&args.init, &args.fourier) {
        (Some(src), _) => InitialData::from_expression(src),
        (None, Some(path)) => InitialData::from_fourier_file(path),
        (None, None) => Ok(InitialData::reference()),
    }
    .map_err(Failure::config)
}

fn prepare(init: &InitArgs, cfg: &SolverConfig) -> Result<(InitialData, mudp_core::PeriodicFunction), Failure> {
    cfg.validate().map_err(config_error)?;
    let data = load_init(init)?;
    let u0 = data.sample(cfg.n).map_err(|e| Failure::config(anyhow::Error::new(e).context("sampling the initial datum")))?;
    Ok((data, u0))
}

#[derive(Debug, Serialize)]
pub struct Choices {
    pub scheme: &'static str,
    pub interpolant: mudp_core::Interpolant,
    pub inverse: mudp_core::InverseRealization,
    pub rhs_mode: mudp_core::RhsMode,
    pub strategy: mudp_core::ConjugationStrategy,
    pub dealias: bool,
    pub trajectory_layout: Layout,
}

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub slope_floor: f64,
    pub u_x_cap: f64,
    pub grid_slope_floor: f64,
    pub inversion_tol: f64,
    pub quadrature_refinement: usize,
}

/// One per file-producing command run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub init: Option<InitSource>,
    pub config: Option<SolverConfig>,
    pub choices: Option<Choices>,
    pub tolerances: Tolerances,
    pub termination: Option<Termination>,
    pub message: Option<String>,
    pub final_time: Option<f64>,
    pub files: Vec<String>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    fn new(command: &'static str, cfg: Option<&SolverConfig>, layout: Layout) -> Self {
        let defaults = SolverConfig::default();
        let c = cfg.unwrap_or(&defaults);
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            init: None,
            config: cfg.copied(),
            choices: cfg.map(|c| Choices {
                scheme: "spectral",
                interpolant: c.interpolant,
                inverse: c.inverse,
                rhs_mode: c.rhs_mode,
                strategy: c.strategy,
                dealias: c.dealias,
                trajectory_layout: layout,
            }),
            tolerances: Tolerances {
                slope_floor: c.slope_floor,
                u_x_cap: c.u_x_cap,
                grid_slope_floor: DEFAULT_SLOPE_FLOOR,
                inversion_tol: DEFAULT_INVERSION_TOL,
                quadrature_refinement: DEFAULT_QUADRATURE_REFINEMENT,
            },
            termination: None,
            message: None,
            final_time: None,
            files: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    fn finish(mut self, dir: &Path, files: FileLog, started: Instant) -> Result<(), Failure> {
        self.files = files.names;
        self.files.push("manifest.json".into());
        self.wall_time_seconds = started.elapsed().as_secs_f64();
        write_json(&dir.join("manifest.json"), &self).map_err(Failure::io)
    }
}

fn exit_for(termination: Termination) -> u8 {
    match termination {
        Termination::Completed => EXIT_OK,
        Termination::BlowupDetected => EXIT_BLOWUP,
        Termination::SolverFailure => EXIT_SOLVER,
    }
}

fn report_termination(termination: Termination, message: Option<&str>) {
    if termination != Termination::Completed {
        eprintln!("{termination:?}: {}", message.unwrap_or("run stopped early"));
    }
}

fn layout(wide: bool) -> Layout {
    if wide {
        Layout::Wide
    } else {
        Layout::Long
    }
}

pub fn run_solve(args: &RunArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let cfg = args.solver.config();
    let (data, u0) = prepare(&args.init, &cfg)?;
    let dir = &args.output.out;
    ensure_dir(dir).map_err(Failure::io)?;
    let traj = solve_eulerian(&u0, &cfg).map_err(|e| Failure { code: EXIT_SOLVER, error: e.into() })?;

    let mut files = FileLog::new(dir);
    let lay = layout(args.output.wide);
    write_eulerian(&files.path("trajectory.csv"), &traj, lay).map_err(Failure::io)?;
    write_monitors(&files.path("monitors.csv"), &traj.monitors).map_err(Failure::io)?;
    let mut m = Manifest::new("solve", Some(&cfg), lay);
    m.init = Some(data.source.clone());
    m.termination = Some(traj.termination);
    m.message = traj.message.clone();
    m.final_time = Some(traj.final_time());
    m.finish(dir, files, started)?;
    report_termination(traj.termination, traj.message.as_deref());
    Ok(exit_for(traj.termination))
}

pub fn run_geodesic(args: &RunArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let cfg = args.solver.config();
    let (data, u0) = prepare(&args.init, &cfg)?;
    let dir = &args.output.out;
    ensure_dir(dir).map_err(Failure::io)?;
    let traj = solve_lagrangian(&u0, &cfg).map_err(|e| Failure { code: EXIT_SOLVER, error: e.into() })?;

    let mut files = FileLog::new(dir);
    let lay = layout(args.output.wide);
    write_lagrangian(&files.path("trajectory.csv"), &traj, lay).map_err(Failure::io)?;
    write_monitors(&files.path("monitors.csv"), &traj.monitors).map_err(Failure::io)?;
    let mut m = Manifest::new("geodesic", Some(&cfg), lay);
    m.init = Some(data.source.clone());
    m.termination = Some(traj.termination);
    m.message = traj.message.clone();
    m.final_time = Some(traj.final_time());
    m.finish(dir, files, started)?;
    report_termination(traj.termination, traj.message.as_deref());
    Ok(exit_for(traj.termination))
}

#[derive(Debug, Serialize)]
struct JacobianSummary {
    modes: usize,
    smallest_singular_value: f64,
    largest_singular_value: f64,
    singular_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ExpmapReport {
    min_slope: f64,
    max_abs_displacement: f64,
    jacobian: Option<JacobianSummary>,
}

pub fn run_expmap(args: &ExpmapArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let cfg = args.solver.config().with_t_end(1.0);
    let (data, u0) = prepare(&args.init, &cfg)?;
    if args.modes > cfg.n / 4 {
        return Err(Failure::config(anyhow::anyhow!("invalid --modes: need M <= n/4 = {}", cfg.n / 4)));
    }
    if !(args.epsilon.is_finite() && args.epsilon > 0.0) {
        return Err(Failure::config(anyhow::anyhow!("invalid --epsilon: must be positive")));
    }
    let dir = &args.output.out;
    ensure_dir(dir).map_err(Failure::io)?;
    let mut files = FileLog::new(dir);
    let mut m = Manifest::new("expmap", Some(&cfg), layout(args.output.wide));
    m.init = Some(data.source.clone());

    let outcome = exp_map(&u0, &cfg).and_then(|phi| {
        let jac = if args.modes > 0 {
            let opts = VariationalOptions { method: args.variational.into(), epsilon: args.epsilon, ..Default::default() };
            Some(jacobian_expmap(&u0, args.modes, &opts, &cfg)?)
        } else {
            None
        };
        Ok((phi, jac))
    });
    let (phi, jac) = match outcome {
        Ok(v) => v,
        Err(e @ CoreError::OutOfDomain { .. }) => {
            m.termination = Some(Termination::BlowupDetected);
            m.message = Some(e.to_string());
            m.finish(dir, files, started)?;
            eprintln!("{e}");
            return Ok(EXIT_BLOWUP);
        }
        Err(e) => return Err(Failure { code: EXIT_SOLVER, error: e.into() }),
    };

    let write = |files: &mut FileLog| -> anyhow::Result<()> {
        let mut w = csv_writer(&files.path("expmap.csv"))?;
        w.write_record(["x", "phi", "phi_disp", "phi_x"])?;
        let slope = phi.slope();
        for (j, x) in nodes(cfg.n).iter().enumerate() {
            let p = phi.displacement().values()[j];
            w.write_record([fmt_f64(*x), fmt_f64(x + p), fmt_f64(p), fmt_f64(slope.values()[j])])?;
        }
        w.flush()?;
        if let Some(j) = &jac {
            let mut w = csv_writer(&files.path("jacobian.csv"))?;
            for row in j.rows() {
                w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
            }
            w.flush()?;
        }
        let report = ExpmapReport {
            min_slope: phi.min_slope(),
            max_abs_displacement: phi.displacement().sup_norm(),
            jacobian: jac.as_ref().map(|j| JacobianSummary {
                modes: j.modes,
                smallest_singular_value: j.smallest_singular_value(),
                largest_singular_value: j.largest_singular_value(),
                singular_values: j.singular_values.clone(),
            }),
        };
        write_json(&files.path("expmap.json"), &report)
    };
    write(&mut files).map_err(Failure::io)?;
    m.termination = Some(Termination::Completed);
    m.final_time = Some(1.0);
    m.finish(dir, files, started)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub fault: f64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

pub fn run_validate(args: &ValidateArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let known = mudp_core::validate::check_names();
    for f in &args.only {
        if !known.iter().any(|n| mudp_core::validate::matches_filter(f, n)) {
            return Err(Failure::config(anyhow::anyhow!("invalid --only: no check or group named {f:?}")));
        }
    }
    if !args.inject_fault.is_finite() {
        return Err(Failure::config(anyhow::anyhow!("invalid --inject-fault: must be finite")));
    }
    ensure_dir(&args.out).map_err(Failure::io)?;
    let opts = ValidateOptions { fault: args.inject_fault, only: args.only.clone() };
    let checks = run_validation(&opts);
    for c in &checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let detail = c.detail.as_deref().map(|d| format!("  ({d})")).unwrap_or_default();
        println!("{verdict}  {:<36} measured {:<12.3e} tolerance {:.0e}{detail}", c.name, c.measured, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} passed, {failed} failed", checks.len() - failed);

    let mut files = FileLog::new(&args.out);
    let report = ValidateReport { fault: args.inject_fault, passed: checks.len() - failed, failed, checks };
    write_json(&files.path("validate.json"), &report).map_err(Failure::io)?;
    let mut m = Manifest::new("validate", Some(&SolverConfig { fault: args.inject_fault, ..Default::default() }), Layout::Long);
    m.termination = Some(Termination::Completed);
    m.finish(&args.out, files, started)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ERROR })
}

pub fn run_converge(args: &ConvergeArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let cfg = args.solver.config();
    let (data, _) = prepare(&args.init, &cfg)?;
    let ladder = if args.n_ladder.is_empty() {
        Ladder::Dt(args.dt_ladder.clone())
    } else {
        Ladder::N(args.n_ladder.clone())
    };
    let ladder = ladder.normalized().map_err(|e| Failure::config(e.context("invalid ladder")))?;
    let solver = match args.solver_kind {
        SolverKindArg::Eulerian => SolverKind::Eulerian,
        SolverKindArg::Lagrangian => SolverKind::Lagrangian,
    };
    ensure_dir(&args.out).map_err(Failure::io)?;
    let report: ConvergeReport = match run_ladder(&data, solver, &cfg, &ladder) {
        Ok(r) => r,
        Err(e) => {
            let code = if let Some(stopped) = e.downcast_ref::<LadderStopped>() {
                if stopped.0.contains(&Termination::SolverFailure) {
                    EXIT_SOLVER
                } else {
                    EXIT_BLOWUP
                }
            } else if let Some(CoreError::InvalidConfig { .. }) = e.downcast_ref::<CoreError>() {
                EXIT_CONFIG
            } else {
                EXIT_SOLVER
            };
            return Err(Failure { code, error: e });
        }
    };

    println!("{:>12} {:>14} {:>14} {:>8} {:>10}", report.ladder, "error", "diff_next", "order", "drop");
    for r in &report.rows {
        let f = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$e}")).unwrap_or_else(|| "-".into());
        let order = r.observed_order.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        println!("{:>12} {:>14} {:>14} {:>8} {:>10}", r.value, f(r.error_vs_finest, 3), f(r.diff_to_next, 3), order, f(r.drop_ratio, 2));
    }
    if let Some(floor) = report.temporal_floor {
        println!("temporal floor {floor:.3e}");
    }

    let mut files = FileLog::new(&args.out);
    let write = |files: &mut FileLog| -> anyhow::Result<()> {
        write_json(&files.path("converge.json"), &report)?;
        write_dat(&files.path("converge.dat"), DAT_HEADER, &report.dat_rows()).context("writing converge.dat")
    };
    write(&mut files).map_err(Failure::io)?;
    let mut m = Manifest::new("converge", Some(&cfg), Layout::Long);
    m.init = Some(data.source.clone());
    m.termination = Some(Termination::Completed);
    m.final_time = Some(cfg.t_end);
    m.finish(&args.out, files, started)?;
    Ok(EXIT_OK)
}
