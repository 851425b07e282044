//! Time integration of the muDP equation.
//!
//! The Eulerian solver advances `u_t = F(u)` by the method of lines; the
//! Lagrangian solver advances the geodesic system `phi_t = xi, xi_t = -P_phi(xi)`
//! from `(id, u0)`. Both use fixed-step classical RK4, record conservation
//! monitors, and stop on blow-up detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_grid, DiffeoS1, Interpolant, PeriodicFunction, DEFAULT_SLOPE_FLOOR};
use crate::operators::{
    apply_a, conjugated_mean, lagrangian_derivatives, ConjugationStrategy, InverseRealization, Operators,
    RhsMode, DEFAULT_QUADRATURE_REFINEMENT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub rhs_mode: RhsMode,
    pub strategy: ConjugationStrategy,
    pub interpolant: Interpolant,
    pub inverse: InverseRealization,
    pub dealias: bool,
    /// Flow-level blow-up threshold on `min phi_x`.
    pub slope_floor: f64,
    /// Blow-up threshold on `sup |u_x|`.
    pub u_x_cap: f64,
    /// Snapshot and monitor cadence in steps.
    pub monitor_every: usize,
    /// Relative `A^{-1}` perturbation used only by the validation harness.
    pub fault: f64,
}

impl Default for SolverConfig {
    /// Reference configuration: `n = 256`, `dt = 1e-3`, horizon 1.
    fn default() -> Self {
        Self {
            n: 256,
            dt: 1e-3,
            t_end: 1.0,
            rhs_mode: RhsMode::MomentumForm,
            strategy: ConjugationStrategy::Compose,
            interpolant: Interpolant::Trig,
            inverse: InverseRealization::Spectral,
            dealias: false,
            slope_floor: 1e-3,
            u_x_cap: 1e3,
            monitor_every: 1,
            fault: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidConfig { field, reason: reason.to_string() });
        if check_grid(self.n).is_err() {
            return bad("n", "must be even and at least 8");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive and finite");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end", "must be non-negative and finite");
        }
        if !(self.u_x_cap > 0.0) {
            return bad("u_x_cap", "must be positive");
        }
        if !(self.slope_floor >= 0.0 && self.slope_floor < 1.0) {
            return bad("slope_floor", "must lie in [0, 1)");
        }
        if self.monitor_every == 0 {
            return bad("monitor_every", "must be at least 1");
        }
        Ok(())
    }

    pub fn operators(&self) -> Operators {
        Operators {
            inverse: self.inverse,
            refinement: DEFAULT_QUADRATURE_REFINEMENT,
            dealias: self.dealias,
            interpolant: self.interpolant,
            slope_floor: DEFAULT_SLOPE_FLOOR,
            fault: self.fault,
        }
    }

    /// Number of steps and the step actually taken, so that the last step lands on `t_end`.
    pub fn schedule(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let steps = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    fn check_grid_of(&self, f: &PeriodicFunction) -> Result<()> {
        if f.n() != self.n {
            return Err(Error::InvalidConfig {
                field: "n",
                reason: format!("initial data has {} nodes, config says {}", f.n(), self.n),
            });
        }
        Ok(())
    }
}

/// Lagrangian state `(phi, xi)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub phi: DiffeoS1,
    pub xi: PeriodicFunction,
    pub t: f64,
}

impl FlowState {
    pub fn new(phi: DiffeoS1, xi: PeriodicFunction, t: f64) -> Result<Self> {
        if phi.n() != xi.n() {
            return Err(Error::GridMismatch { left: phi.n(), right: xi.n() });
        }
        Ok(Self { phi, xi, t })
    }

    /// `(id, u0)` at `t = 0`.
    pub fn initial(u0: &PeriodicFunction) -> Result<Self> {
        Self::new(DiffeoS1::identity(u0.n())?, u0.clone(), 0.0)
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = self.phi.displacement().values().to_vec();
        y.extend_from_slice(self.xi.values());
        y
    }

    fn unpack(y: &[f64], t: f64) -> Result<Self> {
        let n = y.len() / 2;
        let phi = DiffeoS1::from_displacement(PeriodicFunction::new(y[..n].to_vec())?)?;
        Self::new(phi, PeriodicFunction::new(y[n..].to_vec())?, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<S> {
    pub t: f64,
    pub state: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    /// `|mu(u(t)) - mu(u0)|`.
    pub mean_drift: f64,
    /// Relative residual of `(Au o phi) phi_x^3 = m0`; Lagrangian runs only.
    pub momentum_drift: Option<f64>,
    /// Lagrangian runs only.
    pub min_slope: Option<f64>,
    pub sup_ux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupDetected,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub snapshots: Vec<Snapshot<S>>,
    pub monitors: Vec<MonitorRecord>,
    pub termination: Termination,
    /// Reason for early termination.
    pub message: Option<String>,
    /// Initial momentum `m0 = A u0`.
    pub m0: PeriodicFunction,
    /// `mu(u0)`.
    pub mean0: f64,
    /// Step actually taken.
    pub dt: f64,
    pub monitor_every: usize,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &Snapshot<S> {
        self.snapshots.last().expect("trajectory always holds the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    pub fn is_completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Snapshot stored at time `t` (to within a hundredth of a step).
    pub fn at(&self, t: f64) -> Result<&Snapshot<S>> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-2 * self.dt)
            .ok_or(Error::MissingSnapshot(t))
    }

    /// Largest monitored value over the run.
    pub fn max_monitor(&self, f: impl Fn(&MonitorRecord) -> Option<f64>) -> Option<f64> {
        self.monitors.iter().filter_map(f).reduce(f64::max)
    }
}

/// Classical four-stage Runge–Kutta step for an autonomous system.
pub fn step_rk4<F>(y: &[f64], dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect() };
    let finite = |v: Vec<f64>| -> Result<Vec<f64>> {
        match v.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(v),
        }
    };
    let k1 = finite(rhs(y)?)?;
    let k2 = finite(rhs(&axpy(0.5 * dt, &k1))?)?;
    let k3 = finite(rhs(&axpy(0.5 * dt, &k2))?)?;
    let k4 = finite(rhs(&axpy(dt, &k3))?)?;
    let out = (0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    finite(out)
}

/// Quantities inspected by [`detect_blowup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupProbe {
    pub min_slope: Option<f64>,
    pub sup_ux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupStatus {
    Ok,
    BlowupDetected,
}

impl BlowupProbe {
    pub fn eulerian(u: &PeriodicFunction) -> Self {
        Self { min_slope: None, sup_ux: u.dx().sup_norm() }
    }

    /// Inversion-free probe: `u_x o phi = xi_x / phi_x`.
    pub fn lagrangian(state: &FlowState) -> Self {
        let ux = state.xi.dx().zip_with(&state.phi.slope(), |d, s| d / s);
        Self { min_slope: Some(state.phi.min_slope()), sup_ux: ux.sup_norm() }
    }
}

pub fn detect_blowup(probe: &BlowupProbe, cfg: &SolverConfig) -> BlowupStatus {
    let collapsed = probe.min_slope.is_some_and(|s| s <= cfg.slope_floor);
    if collapsed || !(probe.sup_ux < cfg.u_x_cap) {
        BlowupStatus::BlowupDetected
    } else {
        BlowupStatus::Ok
    }
}

/// Method-of-lines integration of `u_t = F(u)` in the configured RHS form.
pub fn solve_eulerian(u0: &PeriodicFunction, cfg: &SolverConfig) -> Result<Trajectory<PeriodicFunction>> {
    cfg.validate()?;
    cfg.check_grid_of(u0)?;
    let ops = cfg.operators();
    let (steps, dt) = cfg.schedule();
    let mean0 = u0.mean();
    let monitor = |t: f64, u: &PeriodicFunction, probe: &BlowupProbe| MonitorRecord {
        t,
        mean_drift: (u.mean() - mean0).abs(),
        momentum_drift: None,
        min_slope: None,
        sup_ux: probe.sup_ux,
    };

    let probe0 = BlowupProbe::eulerian(u0);
    let mut traj = Trajectory {
        snapshots: vec![Snapshot { t: 0.0, state: u0.clone() }],
        monitors: vec![monitor(0.0, u0, &probe0)],
        termination: Termination::Completed,
        message: None,
        m0: apply_a(u0),
        mean0,
        dt,
        monitor_every: cfg.monitor_every,
    };
    if detect_blowup(&probe0, cfg) == BlowupStatus::BlowupDetected {
        traj.termination = Termination::BlowupDetected;
        traj.message = Some(format!("initial sup|u_x| = {:e} exceeds cap", probe0.sup_ux));
        return Ok(traj);
    }

    let mut y = u0.values().to_vec();
    for step in 1..=steps {
        let t = step as f64 * dt;
        let next = step_rk4(&y, dt, |v| {
            let u = PeriodicFunction::from_raw(v.to_vec());
            Ok(ops.mudp_rhs(&u, cfg.rhs_mode).into_values())
        });
        y = match next {
            Ok(y) => y,
            Err(e) => {
                traj.termination = Termination::SolverFailure;
                traj.message = Some(format!("step {step}: {e}"));
                break;
            }
        };
        let u = PeriodicFunction::from_raw(y.clone());
        let probe = BlowupProbe::eulerian(&u);
        let blowup = detect_blowup(&probe, cfg) == BlowupStatus::BlowupDetected;
        if blowup || step % cfg.monitor_every == 0 || step == steps {
            traj.monitors.push(monitor(t, &u, &probe));
            traj.snapshots.push(Snapshot { t, state: u });
        }
        if blowup {
            traj.termination = Termination::BlowupDetected;
            traj.message = Some(format!("t = {t}: sup|u_x| = {:e}", probe.sup_ux));
            break;
        }
    }
    Ok(traj)
}

/// Geodesic flow from `(id, u0)`.
pub fn solve_lagrangian(u0: &PeriodicFunction, cfg: &SolverConfig) -> Result<Trajectory<FlowState>> {
    cfg.check_grid_of(u0)?;
    solve_lagrangian_from(FlowState::initial(u0)?, cfg)
}

/// Geodesic flow from an arbitrary state; `m0` and `mu(u0)` are taken from that state.
pub fn solve_lagrangian_from(initial: FlowState, cfg: &SolverConfig) -> Result<Trajectory<FlowState>> {
    cfg.validate()?;
    cfg.check_grid_of(&initial.xi)?;
    let ops = cfg.operators();
    let (steps, dt) = cfg.schedule();
    let t0 = initial.t;
    let mean0 = conjugated_mean(&initial.xi, &initial.phi);
    let m0 = momentum_density(&initial)?;
    let m0_scale = 1.0 + m0.sup_norm();

    let monitor = |state: &FlowState, probe: &BlowupProbe| -> MonitorRecord {
        let momentum_drift = momentum_density(state)
            .map(|m| m.sup_diff(&m0) / m0_scale)
            .unwrap_or(f64::INFINITY);
        MonitorRecord {
            t: state.t,
            mean_drift: (conjugated_mean(&state.xi, &state.phi) - mean0).abs(),
            momentum_drift: Some(momentum_drift),
            min_slope: probe.min_slope,
            sup_ux: probe.sup_ux,
        }
    };

    let probe0 = BlowupProbe::lagrangian(&initial);
    let mut traj = Trajectory {
        monitors: vec![monitor(&initial, &probe0)],
        snapshots: vec![Snapshot { t: t0, state: initial.clone() }],
        termination: Termination::Completed,
        message: None,
        m0: m0.clone(),
        mean0,
        dt,
        monitor_every: cfg.monitor_every,
    };
    if detect_blowup(&probe0, cfg) == BlowupStatus::BlowupDetected {
        traj.termination = Termination::BlowupDetected;
        traj.message = Some("initial state already past the blow-up thresholds".into());
        return Ok(traj);
    }

    let n = initial.xi.n();
    let mut y = initial.pack();
    for step in 1..=steps {
        let t = t0 + step as f64 * dt;
        let next = step_rk4(&y, dt, |v| {
            let state = FlowState::unpack(v, t)?;
            state.phi.check_slope(cfg.slope_floor)?;
            let p = ops.apply_p_conjugated(&state.xi, &state.phi, cfg.strategy)?;
            let mut out = Vec::with_capacity(2 * n);
            out.extend_from_slice(state.xi.values());
            out.extend(p.values().iter().map(|v| -v));
            Ok(out)
        });
        let state = match next.and_then(|y| FlowState::unpack(&y, t).map(|s| (y, s))) {
            Ok((next_y, state)) => {
                y = next_y;
                state
            }
            Err(e @ Error::SlopeCollapse { .. }) => {
                traj.termination = Termination::BlowupDetected;
                traj.message = Some(format!("step {step}: {e}"));
                break;
            }
            Err(e) => {
                traj.termination = Termination::SolverFailure;
                traj.message = Some(format!("step {step}: {e}"));
                break;
            }
        };
        let probe = BlowupProbe::lagrangian(&state);
        let blowup = detect_blowup(&probe, cfg) == BlowupStatus::BlowupDetected;
        if blowup || step % cfg.monitor_every == 0 || step == steps {
            traj.monitors.push(monitor(&state, &probe));
            traj.snapshots.push(Snapshot { t, state });
        }
        if blowup {
            traj.termination = Termination::BlowupDetected;
            traj.message = Some(format!(
                "t = {t}: min phi_x = {:e}, sup|u_x| = {:e}",
                probe.min_slope.unwrap_or(f64::NAN),
                probe.sup_ux
            ));
            break;
        }
    }
    Ok(traj)
}

/// `(Au o phi) phi_x^3` from the Lagrangian derivative recursion, with
/// `(Au) o phi = mu(u) - a_2`.
pub fn momentum_density(state: &FlowState) -> Result<PeriodicFunction> {
    let a = lagrangian_derivatives(&state.xi, &state.phi, 2, 0.0)?;
    let mean = conjugated_mean(&state.xi, &state.phi);
    let slope = state.phi.slope();
    Ok(a[1].zip_with(&slope, |a2, s| (mean - a2) * s * s * s))
}

/// `u = xi o phi^{-1}`.
pub fn eulerian_velocity(state: &FlowState, ops: &Operators) -> Result<PeriodicFunction> {
    ops.to_eulerian(&state.xi, &state.phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumPath {
    /// Invert `phi`, apply `A` to the Eulerian velocity, compose back.
    #[default]
    Compose,
    /// Use `(Au) o phi = mu(u) - a_2` from the derivative recursion.
    InversionFree,
}

/// `sup |(Au)(phi) phi_x^3 - m0| / (1 + sup |m0|)`.
pub fn momentum_invariant(
    state: &FlowState,
    m0: &PeriodicFunction,
    path: MomentumPath,
    ops: &Operators,
) -> Result<f64> {
    let density = match path {
        MomentumPath::InversionFree => momentum_density(state)?,
        MomentumPath::Compose => {
            let u = eulerian_velocity(state, ops)?;
            let au = apply_a(&u).compose(&state.phi, ops.interpolant)?;
            let slope = state.phi.slope();
            au.zip_with(&slope, |m, s| m * s * s * s)
        }
    };
    Ok(density.sup_diff(m0) / (1.0 + m0.sup_norm()))
}

fn require_dense(traj: &Trajectory<FlowState>) -> Result<()> {
    if traj.monitor_every != 1 {
        return Err(Error::SparseSnapshots(format!(
            "monitor_every = {} (need 1)",
            traj.monitor_every
        )));
    }
    for pair in traj.snapshots.windows(2) {
        let gap = pair[1].t - pair[0].t;
        if (gap - traj.dt).abs() > 1e-9 * traj.dt.max(1.0) {
            return Err(Error::SparseSnapshots(format!("gap {gap} at t = {} vs dt {}", pair[0].t, traj.dt)));
        }
    }
    Ok(())
}

/// Trapezoidal time integrals `int_0^t g(s) ds` of per-snapshot fields.
pub(crate) fn trapezoid<'a>(
    fields: impl Iterator<Item = PeriodicFunction> + 'a,
    dt: f64,
) -> Option<PeriodicFunction> {
    let mut acc: Option<PeriodicFunction> = None;
    let mut prev: Option<PeriodicFunction> = None;
    for g in fields {
        if let Some(p) = &prev {
            let panel = (p + &g).scale(0.5 * dt);
            acc = Some(match acc {
                Some(a) => &a + &panel,
                None => panel,
            });
        }
        prev = Some(g);
    }
    acc.or_else(|| prev.map(|p| p.scale(0.0)))
}

/// `phi_xx(t) = phi_x(t) (int_0^t mu(u) phi_x ds - m0 int_0^t phi_x^{-2} ds)`
/// with trapezoidal time quadrature over the stored steps.
pub fn reconstruct_phixx(traj: &Trajectory<FlowState>, t: f64) -> Result<PeriodicFunction> {
    require_dense(traj)?;
    let target = traj.at(t)?;
    let upto: Vec<&Snapshot<FlowState>> = traj.snapshots.iter().take_while(|s| s.t <= target.t).collect();
    let slopes: Vec<PeriodicFunction> = upto.iter().map(|s| s.state.phi.slope()).collect();
    let means: Vec<f64> = upto.iter().map(|s| conjugated_mean(&s.state.xi, &s.state.phi)).collect();
    let first = trapezoid(slopes.iter().zip(&means).map(|(s, &m)| s.scale(m)), traj.dt)
        .expect("at least one snapshot");
    let second = trapezoid(slopes.iter().map(|s| s.map(|v| 1.0 / (v * v))), traj.dt).expect("at least one snapshot");
    let bracket = &first - &(&traj.m0 * &second);
    Ok(&target.state.phi.slope() * &bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResiduals {
    /// Reconstructed `phi_xx` against the spectral second derivative of the stored lift.
    pub phixx: f64,
    /// `xi_xx` against `xi_x phi_xx / phi_x + phi_x (mu(u) phi_x - m0 phi_x^{-2})`.
    pub xixx: f64,
}

pub fn reconstruction_residuals(traj: &Trajectory<FlowState>, t: f64) -> Result<ReconstructionResiduals> {
    let reconstructed = reconstruct_phixx(traj, t)?;
    let state = &traj.at(t)?.state;
    let phixx = state.phi.curvature();
    let phix = state.phi.slope();
    let mean = conjugated_mean(&state.xi, &state.phi);
    let xix = state.xi.dx();
    let predicted = PeriodicFunction::from_raw(
        (0..phix.n())
            .map(|j| {
                let (s, c, m) = (phix.values()[j], phixx.values()[j], traj.m0.values()[j]);
                xix.values()[j] * c / s + s * (mean * s - m / (s * s))
            })
            .collect(),
    );
    Ok(ReconstructionResiduals {
        phixx: reconstructed.sup_diff(&phixx),
        xixx: state.xi.dxx().sup_diff(&predicted),
    })
}
