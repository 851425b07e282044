//! Exponential map of the geodesic flow and its derivative.
//!
//! `exp(u0) = phi(1)` for the geodesic from `(id, u0)`. The variational flow
//! `psi(t) = d/d eps phi^eps(t)` along the perturbed geodesics from
//! `(id, u + eps w)` equals `D exp(t u)(t w)`; it is computed either by central
//! differences in `eps` or by integrating the linearised geodesic system.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{solve_lagrangian, trapezoid, FlowState, SolverConfig, Trajectory};
use crate::grid::PeriodicFunction;
use crate::operators::apply_a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationalMethod {
    #[default]
    FiniteDifference,
    SensitivityOde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalOptions {
    pub method: VariationalMethod,
    /// Central-difference step in `eps` for [`VariationalMethod::FiniteDifference`].
    pub epsilon: f64,
    /// Differencing step for the directional derivative of the vector field
    /// inside [`VariationalMethod::SensitivityOde`].
    pub stage_step: f64,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        Self { method: VariationalMethod::FiniteDifference, epsilon: 1e-5, stage_step: 1e-6 }
    }
}

impl VariationalOptions {
    pub fn with_method(method: VariationalMethod) -> Self {
        Self { method, ..Default::default() }
    }
}

fn run_to(u0: &PeriodicFunction, t: f64, cfg: &SolverConfig) -> Result<Trajectory<FlowState>> {
    let traj = solve_lagrangian(u0, &cfg.with_t_end(t))?;
    if !traj.is_completed() {
        return Err(Error::OutOfDomain {
            t_target: t,
            reason: traj.message.unwrap_or_else(|| format!("{:?}", traj.termination)),
        });
    }
    Ok(traj)
}

/// Time-one geodesic flow from the identity; `cfg.t_end` is ignored.
pub fn exp_map(u0: &PeriodicFunction, cfg: &SolverConfig) -> Result<crate::grid::DiffeoS1> {
    let sparse = SolverConfig { monitor_every: usize::MAX, ..*cfg };
    Ok(run_to(u0, 1.0, &sparse)?.last().state.phi.clone())
}

/// `sup |exp(s u) - phi_u(s)|` over the lift, where `phi_u` is the geodesic of `u`.
pub fn homogeneity_check(u: &PeriodicFunction, s: f64, cfg: &SolverConfig) -> Result<f64> {
    let sparse = SolverConfig { monitor_every: usize::MAX, ..*cfg };
    let scaled = exp_map(&u.scale(s), &sparse)?;
    let along = run_to(u, s, &sparse)?;
    Ok(scaled.displacement().sup_diff(along.last().state.phi.displacement()))
}

/// Dense record of a variational computation.
#[derive(Debug, Clone)]
pub struct VariationalHistory {
    /// Base geodesic from `(id, u)`, one snapshot per step.
    pub base: Trajectory<FlowState>,
    /// `psi` at each base snapshot time.
    pub psi: Vec<PeriodicFunction>,
}

impl VariationalHistory {
    pub fn final_psi(&self) -> &PeriodicFunction {
        self.psi.last().expect("history holds the initial state")
    }
}

/// `psi(t)` for the perturbation direction `w`.
pub fn variational_flow(
    u: &PeriodicFunction,
    w: &PeriodicFunction,
    t: f64,
    opts: &VariationalOptions,
    cfg: &SolverConfig,
) -> Result<PeriodicFunction> {
    let sparse = SolverConfig { monitor_every: usize::MAX, ..*cfg };
    Ok(variational_history(u, w, t, opts, &sparse)?.final_psi().clone())
}

/// `psi` at every stored step of the base geodesic (dense when `cfg.monitor_every == 1`).
pub fn variational_history(
    u: &PeriodicFunction,
    w: &PeriodicFunction,
    t: f64,
    opts: &VariationalOptions,
    cfg: &SolverConfig,
) -> Result<VariationalHistory> {
    if u.n() != w.n() {
        return Err(Error::GridMismatch { left: u.n(), right: w.n() });
    }
    match opts.method {
        VariationalMethod::FiniteDifference => {
            let eps = opts.epsilon;
            let base = run_to(u, t, cfg)?;
            let plus = run_to(&(u + &w.scale(eps)), t, cfg)?;
            let minus = run_to(&(u - &w.scale(eps)), t, cfg)?;
            let psi = plus
                .snapshots
                .iter()
                .zip(&minus.snapshots)
                .map(|(p, m)| {
                    (p.state.phi.displacement() - m.state.phi.displacement()).scale(0.5 / eps)
                })
                .collect();
            Ok(VariationalHistory { base, psi })
        }
        VariationalMethod::SensitivityOde => sensitivity_history(u, w, t, opts.stage_step, cfg),
    }
}

/// Integrates `(phi, xi)` together with `(psi, psi_t)` under the linearised
/// system, whose vector field is the central difference
/// `(F(s + h d) - F(s - h d)) / 2h` of the geodesic vector field `F`.
fn sensitivity_history(
    u: &PeriodicFunction,
    w: &PeriodicFunction,
    t: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<VariationalHistory> {
    use crate::flows::step_rk4;
    use crate::grid::DiffeoS1;

    let n = u.n();
    let ops = cfg.operators();
    let base = run_to(u, t, cfg)?;
    let (steps, dt) = cfg.with_t_end(t).schedule();

    let field = |y: &[f64]| -> Result<Vec<f64>> {
        let phi = DiffeoS1::from_displacement(PeriodicFunction::new(y[..n].to_vec())?)?;
        let xi = PeriodicFunction::new(y[n..2 * n].to_vec())?;
        let p = ops.apply_p_conjugated(&xi, &phi, cfg.strategy)?;
        let mut out = xi.into_values();
        out.extend(p.values().iter().map(|v| -v));
        Ok(out)
    };

    let mut y: Vec<f64> = vec![0.0; n];
    y.extend_from_slice(u.values());
    y.extend(std::iter::repeat_n(0.0, n));
    y.extend_from_slice(w.values());

    let record = |y: &[f64]| PeriodicFunction::from_raw(y[2 * n..3 * n].to_vec());
    let mut psi = vec![record(&y)];
    for step in 1..=steps {
        y = step_rk4(&y, dt, |v| {
            let (state, dir) = v.split_at(2 * n);
            let mut out = field(state)?;
            let shifted = |sign: f64| -> Vec<f64> {
                state.iter().zip(dir).map(|(s, d)| s + sign * h * d).collect()
            };
            let fp = field(&shifted(1.0))?;
            let fm = field(&shifted(-1.0))?;
            out.extend(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)));
            Ok(out)
        })
        .map_err(|e| Error::OutOfDomain { t_target: t, reason: format!("linearised flow: {e}") })?;
        if step % cfg.monitor_every == 0 || step == steps {
            psi.push(record(&y));
        }
    }
    debug_assert_eq!(psi.len(), base.snapshots.len());
    Ok(VariationalHistory { base, psi })
}

/// Sup-norm residual of the second-derivative identity for `psi`:
///
/// ```text
/// psi_xx = psi_x [mu(u) I(phi_x) - m0 I(phi_x^-2)]
///        + phi_x [mu(w) I(phi_x) + mu(u) I(psi_x)]
///        - phi_x [(mu(w) - w_xx) I(phi_x^-2) - 2 m0 I(psi_x phi_x^-3)]
/// ```
///
/// where `I(g) = int_0^t g(s) ds` by the trapezoidal rule over the stored steps.
pub fn psi_xx_formula_check(
    u: &PeriodicFunction,
    w: &PeriodicFunction,
    t: f64,
    opts: &VariationalOptions,
    cfg: &SolverConfig,
) -> Result<f64> {
    let dense = SolverConfig { monitor_every: 1, ..*cfg };
    let hist = variational_history(u, w, t, opts, &dense)?;
    let dt = hist.base.dt;
    if hist.base.snapshots.len() != hist.psi.len() {
        return Err(Error::SparseSnapshots("psi and base histories differ in length".into()));
    }

    let phix: Vec<PeriodicFunction> = hist.base.snapshots.iter().map(|s| s.state.phi.slope()).collect();
    let psix: Vec<PeriodicFunction> = hist.psi.iter().map(|p| p.dx()).collect();
    let integral = |g: Vec<PeriodicFunction>| trapezoid(g.into_iter(), dt).expect("non-empty history");

    let i_phix = integral(phix.clone());
    let i_phix_m2 = integral(phix.iter().map(|s| s.map(|v| 1.0 / (v * v))).collect());
    let i_psix = integral(psix.clone());
    let i_mixed = integral(
        psix.iter().zip(&phix).map(|(p, s)| p.zip_with(s, |a, b| a / (b * b * b))).collect(),
    );

    let (mu_u, mu_w) = (u.mean(), w.mean());
    let m0 = apply_a(u);
    let wxx = w.dxx();
    let phix_t = phix.last().expect("non-empty");
    let psix_t = psix.last().expect("non-empty");

    let n = u.n();
    let predicted: Vec<f64> = (0..n)
        .map(|j| {
            let a = mu_u * i_phix.values()[j] - m0.values()[j] * i_phix_m2.values()[j];
            let b = mu_w * i_phix.values()[j] + mu_u * i_psix.values()[j];
            let c = (mu_w - wxx.values()[j]) * i_phix_m2.values()[j] - 2.0 * m0.values()[j] * i_mixed.values()[j];
            psix_t.values()[j] * a + phix_t.values()[j] * (b - c)
        })
        .collect();
    let measured = hist.final_psi().dxx();
    Ok(measured.sup_diff(&PeriodicFunction::from_raw(predicted)))
}

/// Real Fourier basis `1, cos(2 pi x), sin(2 pi x), ..., cos(2 pi M x), sin(2 pi M x)`.
pub fn fourier_basis(n: usize, modes: usize) -> Result<Vec<PeriodicFunction>> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut out = vec![PeriodicFunction::constant(n, 1.0)?];
    for j in 1..=modes {
        let k = j as f64;
        out.push(PeriodicFunction::from_fn(n, |x| (tau * k * x).cos())?);
        out.push(PeriodicFunction::from_fn(n, |x| (tau * k * x).sin())?);
    }
    Ok(out)
}

/// Coefficients of `f` in [`fourier_basis`] order.
pub fn basis_coefficients(f: &PeriodicFunction, basis: &[PeriodicFunction]) -> Vec<f64> {
    basis
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let weight = if i == 0 { 1.0 } else { 2.0 };
            weight * (f * b).mean()
        })
        .collect()
}

/// `D exp(u)` restricted to the truncated real Fourier basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpJacobian {
    pub modes: usize,
    /// Column `k` holds the basis coefficients of `psi(1)` for perturbation `b_k`.
    pub matrix: DMatrix<f64>,
    pub base_u: PeriodicFunction,
    pub singular_values: Vec<f64>,
}

impl ExpJacobian {
    pub fn smallest_singular_value(&self) -> f64 {
        self.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// `max |J - I|` entrywise.
    pub fn distance_from_identity(&self) -> f64 {
        let dim = self.matrix.nrows();
        (&self.matrix - DMatrix::<f64>::identity(dim, dim)).amax()
    }
}

pub fn jacobian_expmap(
    u: &PeriodicFunction,
    modes: usize,
    opts: &VariationalOptions,
    cfg: &SolverConfig,
) -> Result<ExpJacobian> {
    let n = u.n();
    if modes == 0 || modes > n / 4 {
        return Err(Error::InvalidConfig { field: "modes", reason: format!("need 1 <= M <= n/4 = {}", n / 4) });
    }
    let basis = fourier_basis(n, modes)?;
    let columns: Vec<Vec<f64>> = basis
        .par_iter()
        .map(|b| variational_flow(u, b, 1.0, opts, cfg).map(|psi| basis_coefficients(&psi, &basis)))
        .collect::<Result<_>>()?;
    let dim = basis.len();
    let matrix = DMatrix::from_fn(dim, dim, |i, k| columns[k][i]);
    let singular_values = matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    Ok(ExpJacobian { modes, matrix, base_u: u.clone(), singular_values })
}
