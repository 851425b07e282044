//! Self-convergence studies over a ladder of time steps or grid sizes.

use anyhow::{bail, ensure};
use mudp_core::flows::{solve_eulerian, solve_lagrangian};
use mudp_core::grid::nodes;
use mudp_core::{Interpolant, PeriodicFunction, SolverConfig, Termination};
use serde::Serialize;

use crate::input::InitialData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Eulerian,
    Lagrangian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ladder {
    Dt(Vec<f64>),
    N(Vec<usize>),
}

impl Ladder {
    /// Sorted coarse to fine; rejects fewer than three distinct rungs.
    pub fn normalized(&self) -> anyhow::Result<Ladder> {
        Ok(match self {
            Ladder::Dt(v) => {
                ensure!(v.iter().all(|d| d.is_finite() && *d > 0.0), "dt ladder values must be positive");
                let mut v = v.clone();
                v.sort_by(|a, b| b.total_cmp(a));
                v.dedup();
                ensure!(v.len() >= 3, "a ladder needs at least 3 distinct values, got {}", v.len());
                Ladder::Dt(v)
            }
            Ladder::N(v) => {
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                ensure!(v.len() >= 3, "a ladder needs at least 3 distinct values, got {}", v.len());
                Ladder::N(v)
            }
        })
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Ladder::Dt(v) => v.clone(),
            Ladder::N(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }
}

/// Some rung did not reach `t_end`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("a ladder run stopped early: {0:?}")]
pub struct LadderStopped(pub Vec<Termination>);

/// Solver output reduced to the fields compared between rungs.
#[derive(Debug, Clone)]
struct Sample {
    fields: Vec<PeriodicFunction>,
    termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    /// `dt` or `n` of this rung.
    pub value: f64,
    /// Sup distance to the finest rung, on this rung's grid; absent for the finest.
    pub error_vs_finest: Option<f64>,
    /// Sup distance to the next finer rung.
    pub diff_to_next: Option<f64>,
    /// Richardson order from this rung and the next two.
    pub observed_order: Option<f64>,
    /// `error_vs_finest` of this rung over that of the next.
    pub drop_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub ladder: &'static str,
    pub solver: SolverKind,
    pub t_end: f64,
    /// Grid for dt ladders, time step for n ladders.
    pub fixed: f64,
    pub rows: Vec<ConvergeRow>,
    /// n ladders only: `sup |s(dt) - s(dt/2)|` at the finest grid, the level
    /// below which grid refinement cannot be observed.
    pub temporal_floor: Option<f64>,
    pub terminations: Vec<Termination>,
}

impl ConvergeReport {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).collect()
    }

    pub fn drop_ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.drop_ratio).collect()
    }

    pub fn all_completed(&self) -> bool {
        self.terminations.iter().all(|t| *t == Termination::Completed)
    }

    /// Whitespace-separated table; missing entries are written as `nan`.
    pub fn dat_rows(&self) -> Vec<Vec<f64>> {
        let o = |v: Option<f64>| v.unwrap_or(f64::NAN);
        self.rows
            .iter()
            .map(|r| vec![r.value, o(r.error_vs_finest), o(r.diff_to_next), o(r.observed_order), o(r.drop_ratio)])
            .collect()
    }
}

pub const DAT_HEADER: &[&str] = &["value", "error_vs_finest", "diff_to_next", "observed_order", "drop_ratio"];

fn run(init: &InitialData, solver: SolverKind, cfg: &SolverConfig) -> anyhow::Result<Sample> {
    let u0 = init.sample(cfg.n)?;
    let sparse = SolverConfig { monitor_every: usize::MAX, ..*cfg };
    Ok(match solver {
        SolverKind::Eulerian => {
            let traj = solve_eulerian(&u0, &sparse)?;
            Sample { fields: vec![traj.last().state.clone()], termination: traj.termination }
        }
        SolverKind::Lagrangian => {
            let traj = solve_lagrangian(&u0, &sparse)?;
            let s = &traj.last().state;
            Sample { fields: vec![s.phi.displacement().clone(), s.xi.clone()], termination: traj.termination }
        }
    })
}

/// `f` at the nodes of an `n`-point grid: exact subsampling when the grids
/// nest, trigonometric interpolation otherwise.
fn restrict(f: &PeriodicFunction, n: usize) -> PeriodicFunction {
    if f.n() == n {
        return f.clone();
    }
    if f.n().is_multiple_of(n) {
        let stride = f.n() / n;
        return PeriodicFunction::new(f.values().iter().step_by(stride).copied().collect()).expect("finite");
    }
    PeriodicFunction::new(f.evaluate(&nodes(n), Interpolant::Trig)).expect("finite")
}

fn distance(a: &Sample, b: &Sample) -> f64 {
    let n = a.fields[0].n().min(b.fields[0].n());
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| restrict(x, n).sup_diff(&restrict(y, n)))
        .fold(0.0, f64::max)
}

pub fn run_ladder(
    init: &InitialData,
    solver: SolverKind,
    base: &SolverConfig,
    ladder: &Ladder,
) -> anyhow::Result<ConvergeReport> {
    let ladder = ladder.normalized()?;
    let configs: Vec<SolverConfig> = match &ladder {
        Ladder::Dt(v) => v.iter().map(|&dt| base.with_dt(dt)).collect(),
        Ladder::N(v) => v.iter().map(|&n| base.with_n(n)).collect(),
    };
    for c in &configs {
        c.validate()?;
    }
    let samples: Vec<Sample> = configs.iter().map(|c| run(init, solver, c)).collect::<anyhow::Result<_>>()?;
    let terminations: Vec<Termination> = samples.iter().map(|s| s.termination).collect();
    if terminations.iter().any(|t| *t != Termination::Completed) {
        bail!(LadderStopped(terminations));
    }

    let values = ladder.values();
    let last = samples.len() - 1;
    let err: Vec<Option<f64>> =
        (0..samples.len()).map(|i| (i < last).then(|| distance(&samples[i], &samples[last]))).collect();
    let diff: Vec<Option<f64>> =
        (0..samples.len()).map(|i| (i < last).then(|| distance(&samples[i], &samples[i + 1]))).collect();

    let rows = (0..samples.len())
        .map(|i| {
            let observed_order = (i + 2 <= last).then(|| {
                let (d0, d1) = (diff[i].unwrap(), diff[i + 1].unwrap());
                let (h0, h1) = match &ladder {
                    Ladder::Dt(_) => (values[i], values[i + 1]),
                    Ladder::N(_) => (1.0 / values[i], 1.0 / values[i + 1]),
                };
                (d0 / d1).ln() / (h0 / h1).ln()
            });
            let drop_ratio = (i + 1 < last).then(|| err[i].unwrap() / err[i + 1].unwrap());
            ConvergeRow { value: values[i], error_vs_finest: err[i], diff_to_next: diff[i], observed_order, drop_ratio }
        })
        .collect();

    let temporal_floor = match &ladder {
        Ladder::Dt(_) => None,
        Ladder::N(_) => {
            let finest = configs[last];
            let half = run(init, solver, &finest.with_dt(finest.dt / 2.0))?;
            Some(distance(&samples[last], &half))
        }
    };

    let (kind, fixed) = match &ladder {
        Ladder::Dt(_) => ("dt", base.n as f64),
        Ladder::N(_) => ("n", base.dt),
    };
    Ok(ConvergeReport { ladder: kind, solver, t_end: base.t_end, fixed, rows, temporal_floor, terminations })
}
