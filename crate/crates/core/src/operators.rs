//! Nonlocal operator calculus of the muDP equation.
//!
//! `A = mu - d_x^2` with two independent inverses, the quadratic operators
//! `Q(f) = 3(f_x f_xx + (Af) f_x)` and `P = A^{-1} Q`, the symmetric bilinear
//! operator `B`, the Eulerian right-hand side in three equivalent forms, and the
//! Lagrangian-frame (conjugated) versions `P_phi = R_phi P R_{phi^{-1}}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{DiffeoS1, Interpolant, InversionOptions, PeriodicFunction, DEFAULT_SLOPE_FLOOR};

/// Refinement factor of the quadrature grid used by [`invert_a_closed`].
pub const DEFAULT_QUADRATURE_REFINEMENT: usize = 8;

/// Which realisation of `A^{-1}` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseRealization {
    /// Per-mode division by `(2 pi k)^2`, mean untouched.
    #[default]
    Spectral,
    /// Explicit closed-form integral formula evaluated by composite Simpson quadrature.
    Closed,
}

/// Form in which the Eulerian right-hand side `u_t` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    /// `-A^{-1}(u (Au)_x + 3 (Au) u_x)`
    #[default]
    MomentumForm,
    /// `-(u u_x + P(u))`
    TransportPlusP,
    /// `-(u u_x + 3 mu(u) d_x A^{-1} u)`
    Quasilinear,
}

impl RhsMode {
    pub const ALL: [RhsMode; 3] = [RhsMode::MomentumForm, RhsMode::TransportPlusP, RhsMode::Quasilinear];
}

/// How `P_phi` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationStrategy {
    /// Invert `phi`, apply `P` in the Eulerian frame, compose back.
    #[default]
    Compose,
    /// Build `Q_phi` from the Lagrangian derivative recursion and solve `A_phi eta = Q_phi`.
    Recursion,
}

/// `mu(u) - u_xx`.
pub fn apply_a(u: &PeriodicFunction) -> PeriodicFunction {
    let mean = u.mean();
    u.dxx().map(|v| mean - v)
}

/// `A^{-1}` by division in Fourier space.
pub fn invert_a_spectral(f: &PeriodicFunction) -> PeriodicFunction {
    let n = f.n();
    let mut c = fourier::forward(f.values());
    for (j, cj) in c.iter_mut().enumerate().skip(1) {
        let k = fourier::wavenumber(j, n) as f64;
        *cj /= (2.0 * std::f64::consts::PI * k).powi(2);
    }
    PeriodicFunction::from_raw(fourier::inverse(&c))
}

/// `A^{-1}` from the explicit integral formula
///
/// ```text
/// (A^{-1} f)(x) = (x^2/2 - x/2 + 13/12) int_0^1 f + (x - 1/2) int_0^1 int_0^a f
///                 - int_0^x int_0^a f + int_0^1 int_0^a int_0^b f
/// ```
///
/// The iterated integrals are reduced to single integrals with polynomial
/// weights (`int_0^x int_0^a f = int_0^x (x - b) f(b) db`, and likewise for the
/// others), and every single integral is computed by composite Simpson on the
/// trigonometric interpolant sampled `refinement` times finer than the grid.
/// Odd refinements are rounded up.
pub fn invert_a_closed(f: &PeriodicFunction, refinement: usize) -> PeriodicFunction {
    let n = f.n();
    let r = refinement.max(2).next_multiple_of(2);
    let m = n * r;
    let h = 1.0 / m as f64;
    let mut g = fourier::refine(f.values(), r);
    g.push(g[0]);
    let x = |i: usize| i as f64 * h;

    // cumulative Simpson of g and b*g at even fine indices
    let mut f0 = vec![0.0; m / 2 + 1];
    let mut f1 = vec![0.0; m / 2 + 1];
    for i in 0..m / 2 {
        let (a, b, c) = (2 * i, 2 * i + 1, 2 * i + 2);
        f0[i + 1] = f0[i] + h / 3.0 * (g[a] + 4.0 * g[b] + g[c]);
        f1[i + 1] = f1[i] + h / 3.0 * (x(a) * g[a] + 4.0 * x(b) * g[b] + x(c) * g[c]);
    }
    let simpson = |w: &dyn Fn(f64) -> f64| {
        (0..m / 2).fold(0.0, |acc, i| {
            let (a, b, c) = (2 * i, 2 * i + 1, 2 * i + 2);
            acc + h / 3.0 * (w(x(a)) * g[a] + 4.0 * w(x(b)) * g[b] + w(x(c)) * g[c])
        })
    };
    let mean = f0[m / 2];
    let double = simpson(&|b| 1.0 - b);
    let triple = simpson(&|c| 0.5 * (1.0 - c) * (1.0 - c));

    let out = (0..n)
        .map(|j| {
            let xj = j as f64 / n as f64;
            let k = j * r / 2;
            let inner = xj * f0[k] - f1[k];
            (0.5 * xj * xj - 0.5 * xj + 13.0 / 12.0) * mean + (xj - 0.5) * double - inner + triple
        })
        .collect();
    PeriodicFunction::from_raw(out)
}

/// `3 (f_x f_xx + (Af) f_x)`.
pub fn apply_q(f: &PeriodicFunction) -> PeriodicFunction {
    let fx = f.dx();
    let fxx = f.dxx();
    let af = apply_a(f);
    let lhs = &fx * &fxx;
    let rhs = &af * &fx;
    (&lhs + &rhs).scale(3.0)
}

/// `mu(xi o phi^{-1}) = int xi phi_x`, computed without inverting `phi`.
pub fn conjugated_mean(xi: &PeriodicFunction, phi: &DiffeoS1) -> f64 {
    (xi * &phi.slope()).mean()
}

/// `a_1..a_r` with `a_k = ((xi o phi^{-1})^{(k)}) o phi`, via
/// `a_1 = xi_x / phi_x` and `a_{k+1} = (a_k)_x / phi_x`.
pub fn lagrangian_derivatives(
    xi: &PeriodicFunction,
    phi: &DiffeoS1,
    r: usize,
    slope_floor: f64,
) -> Result<Vec<PeriodicFunction>> {
    if !(1..=3).contains(&r) {
        return Err(Error::InvalidOrder(r as u32));
    }
    if xi.n() != phi.n() {
        return Err(Error::GridMismatch { left: xi.n(), right: phi.n() });
    }
    phi.check_slope(slope_floor)?;
    let slope = phi.slope();
    let mut out: Vec<PeriodicFunction> = Vec::with_capacity(r);
    let mut current = xi.clone();
    for _ in 0..r {
        let next = current.dx().zip_with(&slope, |d, s| d / s);
        out.push(next.clone());
        current = next;
    }
    Ok(out)
}

/// Operator settings shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Operators {
    pub inverse: InverseRealization,
    /// Quadrature refinement for [`InverseRealization::Closed`].
    pub refinement: usize,
    /// 2/3-rule truncation of quadratic products.
    pub dealias: bool,
    pub interpolant: Interpolant,
    /// Slope floor for diffeomorphism inversion and Lagrangian derivatives.
    pub slope_floor: f64,
    /// Relative perturbation applied to every `A^{-1}` result. Zero except when
    /// exercising the validation harness.
    pub fault: f64,
}

impl Default for Operators {
    fn default() -> Self {
        Self {
            inverse: InverseRealization::Spectral,
            refinement: DEFAULT_QUADRATURE_REFINEMENT,
            dealias: false,
            interpolant: Interpolant::Trig,
            slope_floor: DEFAULT_SLOPE_FLOOR,
            fault: 0.0,
        }
    }
}

impl Operators {
    pub fn invert_a(&self, f: &PeriodicFunction) -> PeriodicFunction {
        let g = match self.inverse {
            InverseRealization::Spectral => invert_a_spectral(f),
            InverseRealization::Closed => invert_a_closed(f, self.refinement),
        };
        if self.fault != 0.0 {
            g.scale(1.0 + self.fault)
        } else {
            g
        }
    }

    fn product(&self, a: &PeriodicFunction, b: &PeriodicFunction) -> PeriodicFunction {
        if self.dealias {
            let a = PeriodicFunction::from_raw(fourier::truncate_two_thirds(a.values()));
            let b = PeriodicFunction::from_raw(fourier::truncate_two_thirds(b.values()));
            PeriodicFunction::from_raw(fourier::truncate_two_thirds((&a * &b).values()))
        } else {
            a * b
        }
    }

    fn q(&self, f: &PeriodicFunction) -> PeriodicFunction {
        if !self.dealias {
            return apply_q(f);
        }
        let fx = f.dx();
        let lhs = self.product(&fx, &f.dxx());
        let rhs = self.product(&apply_a(f), &fx);
        (&lhs + &rhs).scale(3.0)
    }

    /// `P(f) = A^{-1} Q(f)`.
    pub fn apply_p(&self, f: &PeriodicFunction) -> PeriodicFunction {
        self.invert_a(&self.q(f))
    }

    /// `B(v, w) = 1/2 A^{-1}(v (Aw)_x + w (Av)_x + 3 (Av) w_x + 3 (Aw) v_x)`.
    pub fn apply_b(&self, v: &PeriodicFunction, w: &PeriodicFunction) -> Result<PeriodicFunction> {
        if v.n() != w.n() {
            return Err(Error::GridMismatch { left: v.n(), right: w.n() });
        }
        let av = apply_a(v);
        let aw = apply_a(w);
        let terms = [
            self.product(v, &aw.dx()),
            self.product(w, &av.dx()),
            self.product(&av, &w.dx()).scale(3.0),
            self.product(&aw, &v.dx()).scale(3.0),
        ];
        let sum = terms[1..].iter().fold(terms[0].clone(), |acc, t| &acc + t);
        Ok(self.invert_a(&sum).scale(0.5))
    }

    /// Eulerian `u_t` in the chosen form.
    pub fn mudp_rhs(&self, u: &PeriodicFunction, mode: RhsMode) -> PeriodicFunction {
        let ux = u.dx();
        match mode {
            RhsMode::MomentumForm => {
                let au = apply_a(u);
                let inner = &self.product(u, &au.dx()) + &self.product(&au, &ux).scale(3.0);
                -&self.invert_a(&inner)
            }
            RhsMode::TransportPlusP => -&(&self.product(u, &ux) + &self.apply_p(u)),
            RhsMode::Quasilinear => {
                let nonlocal = self.invert_a(u).dx().scale(3.0 * u.mean());
                -&(&self.product(u, &ux) + &nonlocal)
            }
        }
    }

    fn inversion_options(&self) -> InversionOptions {
        InversionOptions { slope_floor: self.slope_floor, interpolant: self.interpolant, ..Default::default() }
    }

    /// `xi o phi^{-1}`.
    pub fn to_eulerian(&self, xi: &PeriodicFunction, phi: &DiffeoS1) -> Result<PeriodicFunction> {
        let inv = phi.invert(&self.inversion_options())?;
        xi.compose(&inv, self.interpolant)
    }

    /// `P_phi(xi) = P(xi o phi^{-1}) o phi`.
    pub fn apply_p_conjugated(
        &self,
        xi: &PeriodicFunction,
        phi: &DiffeoS1,
        strategy: ConjugationStrategy,
    ) -> Result<PeriodicFunction> {
        if xi.n() != phi.n() {
            return Err(Error::GridMismatch { left: xi.n(), right: phi.n() });
        }
        phi.check_slope(self.slope_floor)?;
        match strategy {
            ConjugationStrategy::Compose => {
                let u = self.to_eulerian(xi, phi)?;
                self.apply_p(&u).compose(phi, self.interpolant)
            }
            ConjugationStrategy::Recursion => self.p_conjugated_recursion(xi, phi),
        }
    }

    fn p_conjugated_recursion(&self, xi: &PeriodicFunction, phi: &DiffeoS1) -> Result<PeriodicFunction> {
        let a = lagrangian_derivatives(xi, phi, 2, self.slope_floor)?;
        let (a1, a2) = (&a[0], &a[1]);
        let mean = conjugated_mean(xi, phi);
        // (Au) o phi = mu(u) - a_2
        let au = a2.map(|v| mean - v);
        let q = (&self.product(a1, a2) + &self.product(&au, a1)).scale(3.0);
        let eta = solve_conjugated_a(&q, phi)?;
        Ok(if self.fault != 0.0 { eta.scale(1.0 + self.fault) } else { eta })
    }
}

/// Circulant matrix of the spectral derivative of the given order.
fn spectral_derivative_matrix(n: usize, order: u32) -> DMatrix<f64> {
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let column = PeriodicFunction::from_raw(e0).spectral_derivative(order);
    let c = column.values();
    DMatrix::from_fn(n, n, |i, j| c[(i + n - j) % n])
}

/// Solves `A_phi eta = rhs` where
/// `A_phi eta = mu(eta o phi^{-1}) - ((eta o phi^{-1})_xx) o phi`
/// `          = <eta, phi_x> - eta_xx / phi_x^2 + eta_x phi_xx / phi_x^3`,
/// assembled densely at grid resolution with a rank-one mean row.
pub fn solve_conjugated_a(rhs: &PeriodicFunction, phi: &DiffeoS1) -> Result<PeriodicFunction> {
    let n = rhs.n();
    let slope = phi.slope();
    let curv = phi.curvature();
    let d1 = spectral_derivative_matrix(n, 1);
    let d2 = spectral_derivative_matrix(n, 2);
    let s = slope.values();
    let c = curv.values();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        s[j] / n as f64 - d2[(i, j)] / (s[i] * s[i]) + d1[(i, j)] * c[i] / (s[i] * s[i] * s[i])
    });
    let lu = matrix.lu();
    let diag = lu.u().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    let b = DVector::from_column_slice(rhs.values());
    let x = lu.solve(&b).ok_or_else(|| Error::LinearSolve {
        reason: format!("singular matrix (pivot range {lo:e}..{hi:e})"),
    })?;
    PeriodicFunction::new(x.iter().copied().collect()).map_err(|_| Error::LinearSolve {
        reason: format!("non-finite solution (pivot range {lo:e}..{hi:e})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::TrigPolynomial;
    use std::f64::consts::PI;

    const TAU: f64 = 2.0 * PI;

    fn cos_mode(n: usize, k: f64) -> PeriodicFunction {
        PeriodicFunction::from_fn(n, |x| (TAU * k * x).cos()).unwrap()
    }

    fn wavy(n: usize, amp: f64) -> DiffeoS1 {
        DiffeoS1::from_displacement(PeriodicFunction::from_fn(n, |x| amp * (TAU * x).sin()).unwrap()).unwrap()
    }

    #[test]
    fn apply_a_examples() {
        let n = 128;
        let c = PeriodicFunction::constant(n, 0.7).unwrap();
        assert!(apply_a(&c).sup_diff(&c) <= 1e-14);
        for k in [1.0, 2.0] {
            let f = cos_mode(n, k);
            assert!(apply_a(&f).sup_diff(&f.scale((TAU * k).powi(2))) <= 1e-10);
        }
        let f = PeriodicFunction::from_fn(n, |x| 0.3 + (TAU * x).cos()).unwrap();
        let expected = PeriodicFunction::from_fn(n, |x| 0.3 + TAU * TAU * (TAU * x).cos()).unwrap();
        assert!(apply_a(&f).sup_diff(&expected) <= 1e-10);
    }

    #[test]
    fn closed_inverse_examples() {
        let n = 128;
        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!(invert_a_closed(&one, 4).sup_diff(&one) <= 1e-13);
        let f = cos_mode(n, 1.0);
        let expected = f.scale(1.0 / (TAU * TAU));
        assert!(invert_a_closed(&f, 4).sup_diff(&expected) <= 1e-8);
        assert!(invert_a_spectral(&f).sup_diff(&expected) <= 1e-15);
    }

    #[test]
    fn closed_inverse_preserves_mean() {
        for seed in 0..5 {
            let f = TrigPolynomial::random(seed, 10, 1.0, 1.0).sample(128).unwrap();
            assert!((invert_a_closed(&f, 8).mean() - f.mean()).abs() <= 1e-10);
        }
    }

    #[test]
    fn spectral_inverse_examples() {
        let n = 64;
        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!(invert_a_spectral(&one).sup_diff(&one) <= 1e-15);
        let f = cos_mode(n, 2.0);
        assert!(invert_a_spectral(&f).sup_diff(&f.scale(1.0 / (4.0 * PI).powi(2))) <= 1e-15);
    }

    #[test]
    fn two_sided_inverse() {
        let n = 128;
        for seed in 0..5 {
            let f = TrigPolynomial::random(seed, n / 4, 0.5, 1.0).sample(n).unwrap();
            assert!(apply_a(&invert_a_spectral(&f)).sup_diff(&f) <= 1e-11);
            assert!(invert_a_spectral(&apply_a(&f)).sup_diff(&f) <= 1e-11);
        }
    }

    #[test]
    fn q_examples() {
        let n = 128;
        assert!(apply_q(&PeriodicFunction::constant(n, 2.0).unwrap()).sup_norm() <= 1e-12);
        assert!(apply_q(&cos_mode(n, 1.0)).sup_norm() <= 1e-10);
        // Q(f) = 3 mu(f) f_x identically
        for seed in 0..5 {
            let p = TrigPolynomial::random(seed, 6, 0.5, 0.3);
            let f = p.sample(n).unwrap();
            let expected = p.sample_derivative(n, 1).unwrap().scale(3.0 * p.mean);
            assert!(apply_q(&f).sup_diff(&expected) <= 1e-10);
        }
    }

    #[test]
    fn p_examples() {
        let ops = Operators::default();
        let n = 128;
        assert!(ops.apply_p(&PeriodicFunction::constant(n, 0.4).unwrap()).sup_norm() <= 1e-14);
        assert!(ops.apply_p(&cos_mode(n, 1.0)).sup_norm() <= 1e-12);
        for seed in 0..5 {
            let f = TrigPolynomial::random(seed, 6, 0.5, 0.3).sample(n).unwrap();
            let expected = invert_a_spectral(&f).dx().scale(3.0 * f.mean());
            assert!(ops.apply_p(&f).sup_diff(&expected) <= 1e-9);
        }
    }

    #[test]
    fn b_examples() {
        let ops = Operators::default();
        let n = 128;
        let v = TrigPolynomial::random(1, 5, 0.5, 0.3).sample(n).unwrap();
        let w = TrigPolynomial::random(2, 5, 0.5, 0.3).sample(n).unwrap();
        assert!(ops.apply_b(&v, &w).unwrap().sup_diff(&ops.apply_b(&w, &v).unwrap()) <= 1e-13);

        let au = apply_a(&v);
        let direct = invert_a_spectral(&(&(&v * &au.dx()) + &(&au * &v.dx()).scale(3.0)));
        assert!(ops.apply_b(&v, &v).unwrap().sup_diff(&direct) <= 1e-10);

        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!(ops.apply_b(&one, &one).unwrap().sup_norm() <= 1e-14);
        let short = PeriodicFunction::constant(64, 1.0).unwrap();
        assert!(ops.apply_b(&one, &short).is_err());
    }

    #[test]
    fn rhs_constant_is_stationary() {
        let u = PeriodicFunction::constant(64, 0.3).unwrap();
        let ops = Operators::default();
        for mode in RhsMode::ALL {
            assert!(ops.mudp_rhs(&u, mode).sup_norm() <= 1e-14, "{mode:?}");
        }
    }

    #[test]
    fn rhs_two_term_symbolic_oracle() {
        let (c, a, n) = (0.2, 0.1, 128);
        let u = PeriodicFunction::from_fn(n, |x| c + a * (TAU * x).cos()).unwrap();
        let expected = PeriodicFunction::from_fn(n, |x| {
            a * c * (TAU + 3.0 / TAU) * (TAU * x).sin() + PI * a * a * (2.0 * TAU * x).sin()
        })
        .unwrap();
        let ops = Operators::default();
        for mode in RhsMode::ALL {
            assert!(ops.mudp_rhs(&u, mode).sup_diff(&expected) <= 1e-9, "{mode:?}");
        }
    }

    #[test]
    fn rhs_modes_agree_and_have_zero_mean() {
        let ops = Operators::default();
        for seed in 0..10 {
            let u = TrigPolynomial::random_bounded(seed, 8, 0.5, 0.2).sample(128).unwrap();
            let r: Vec<_> = RhsMode::ALL.iter().map(|&m| ops.mudp_rhs(&u, m)).collect();
            assert!(r[0].sup_diff(&r[1]) <= 1e-10);
            assert!(r[0].sup_diff(&r[2]) <= 1e-10);
            assert!(r[1].sup_diff(&r[2]) <= 1e-10);
            for ri in &r {
                assert!(ri.mean().abs() <= 1e-12);
            }
            let b = ops.apply_b(&u, &u).unwrap();
            assert!((&b + &r[0]).sup_norm() <= 1e-11);
        }
    }

    #[test]
    fn closed_realization_drives_rhs() {
        let closed = Operators { inverse: InverseRealization::Closed, ..Default::default() };
        let spectral = Operators::default();
        let u = TrigPolynomial::random_bounded(4, 3, 0.3, 0.2).sample(128).unwrap();
        let reference = spectral.mudp_rhs(&u, RhsMode::MomentumForm);
        let d = closed.mudp_rhs(&u, RhsMode::MomentumForm).sup_diff(&reference);
        assert!(d <= 1e-8 * reference.sup_norm(), "{d}");
    }

    #[test]
    fn dealiasing_is_harmless_on_resolved_data() {
        let ops = Operators { dealias: true, ..Default::default() };
        let u = TrigPolynomial::random_bounded(5, 6, 0.3, 0.2).sample(128).unwrap();
        let d = ops
            .mudp_rhs(&u, RhsMode::TransportPlusP)
            .sup_diff(&Operators::default().mudp_rhs(&u, RhsMode::TransportPlusP));
        assert!(d <= 1e-12);
    }

    #[test]
    fn fault_perturbs_inverse() {
        let ops = Operators { fault: 1e-3, ..Default::default() };
        let f = cos_mode(32, 1.0);
        let d = ops.invert_a(&f).sup_diff(&invert_a_spectral(&f));
        assert!((d - 1e-3 / (TAU * TAU)).abs() < 1e-12);
    }

    #[test]
    fn conjugated_mean_examples() {
        let n = 256;
        let xi = TrigPolynomial::random(9, 5, 0.5, 0.2).sample(n).unwrap();
        let id = DiffeoS1::identity(n).unwrap();
        assert!((conjugated_mean(&xi, &id) - xi.mean()).abs() <= 1e-15);
        let phi = wavy(n, 0.1);
        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!((conjugated_mean(&one, &phi) - 1.0).abs() <= 1e-14);
        let eulerian = Operators::default().to_eulerian(&xi, &phi).unwrap();
        assert!((conjugated_mean(&xi, &phi) - eulerian.mean()).abs() <= 1e-9);
    }

    #[test]
    fn lagrangian_derivatives_examples() {
        let n = 256;
        let id = DiffeoS1::identity(n).unwrap();
        let p = TrigPolynomial::random(3, 5, 0.5, 0.2);
        let xi = p.sample(n).unwrap();
        let a = lagrangian_derivatives(&xi, &id, 3, 1e-8).unwrap();
        for (k, ak) in a.iter().enumerate() {
            let exact = p.sample_derivative(n, k as u32 + 1).unwrap();
            let err = ak.sup_diff(&exact);
            assert!(err <= 1e-10 * exact.sup_norm(), "{err:e}");
        }

        // chain rule oracle with g = cos(2 pi x)
        let phi = wavy(n, 0.1);
        let lift = |x: f64| x + 0.1 * (TAU * x).sin();
        let g = |x: f64, k: u32| TAU.powi(k as i32) * (TAU * x + k as f64 * PI / 2.0).cos();
        let xi = PeriodicFunction::from_fn(n, |x| g(lift(x), 0)).unwrap();
        let a = lagrangian_derivatives(&xi, &phi, 3, 1e-8).unwrap();
        for (k, ak) in a.iter().enumerate() {
            let expected = PeriodicFunction::from_fn(n, |x| g(lift(x), k as u32 + 1)).unwrap();
            let err = ak.sup_diff(&expected);
            // a_3 carries three spectral differentiations of roundoff, ~(pi n)^3 eps
            let tol = if k < 2 { 1e-8 } else { 1e-8 * expected.sup_norm() };
            assert!(err <= tol, "k={} err={err:e}", k + 1);
        }

        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!(lagrangian_derivatives(&one, &phi, 1, 1e-8).unwrap()[0].sup_norm() <= 1e-14);
        assert!(lagrangian_derivatives(&one, &phi, 4, 1e-8).is_err());
        assert!(matches!(
            lagrangian_derivatives(&one, &phi, 1, 0.9),
            Err(Error::SlopeCollapse { .. })
        ));
    }

    #[test]
    fn conjugated_p_at_identity() {
        let n = 128;
        let ops = Operators::default();
        let xi = TrigPolynomial::random_bounded(11, 6, 0.3, 0.1).sample(n).unwrap();
        let id = DiffeoS1::identity(n).unwrap();
        let p = ops.apply_p(&xi);
        for strategy in [ConjugationStrategy::Compose, ConjugationStrategy::Recursion] {
            let d = ops.apply_p_conjugated(&xi, &id, strategy).unwrap().sup_diff(&p);
            assert!(d <= 1e-12, "{strategy:?}: {d}");
        }
    }

    #[test]
    fn conjugated_p_kills_constants() {
        let n = 128;
        let ops = Operators::default();
        let xi = PeriodicFunction::constant(n, 0.25).unwrap();
        let phi = wavy(n, 0.05);
        for strategy in [ConjugationStrategy::Compose, ConjugationStrategy::Recursion] {
            assert!(ops.apply_p_conjugated(&xi, &phi, strategy).unwrap().sup_norm() <= 1e-12);
        }
    }

    #[test]
    fn conjugation_strategies_agree() {
        let n = 256;
        let ops = Operators::default();
        let xi = PeriodicFunction::from_fn(n, |x| 0.2 + 0.05 * (TAU * x).cos()).unwrap();
        let phi = wavy(n, 0.05);
        let a = ops.apply_p_conjugated(&xi, &phi, ConjugationStrategy::Compose).unwrap();
        let b = ops.apply_p_conjugated(&xi, &phi, ConjugationStrategy::Recursion).unwrap();
        assert!(a.sup_diff(&b) <= 1e-7, "{}", a.sup_diff(&b));
    }
}
