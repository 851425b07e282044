//! Periodic function calculus on the unit circle `R/Z`.
//!
//! [`PeriodicFunction`] holds samples on the uniform grid `x_j = j/n`, and
//! [`DiffeoS1`] holds an orientation-preserving circle diffeomorphism through the
//! periodic displacement of its lift, `phi(x_j) = x_j + p_j`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;

/// Minimum slope below which a lift is treated as numerically non-invertible.
pub const DEFAULT_SLOPE_FLOOR: f64 = 1e-8;
/// Target accuracy of [`DiffeoS1::invert`] in lift coordinates.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Spectral,
    FiniteDifference,
}

/// Interpolant used to evaluate grid data off the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolant {
    /// Band-limited trigonometric interpolant.
    #[default]
    Trig,
    /// Periodic cubic spline.
    Spline,
}

/// A real function on the circle sampled at `n` uniform nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    values: Vec<f64>,
}

pub(crate) fn check_grid(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGridSize(n));
    }
    Ok(())
}

/// Grid nodes `j/n`, `j = 0..n`.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / n as f64).collect()
}

impl PeriodicFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_grid(values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(n)?;
        Self::new(nodes(n).into_iter().map(f).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::constant(n, 0.0)
    }

    /// Wraps values produced by crate-internal arithmetic on valid inputs.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 8 && values.len().is_multiple_of(2));
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Uniform-grid average, exact for band-limited data.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup_j |f_j - g_j|`.
    pub fn sup_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n(), other.n(), "grid size mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.n(), other.n(), "grid size mismatch");
        Self::from_raw(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// Derivative of order 1, 2 or 3.
    ///
    /// The spectral scheme multiplies mode `k` by `(2 pi i k)^order` and zeroes the
    /// Nyquist mode for odd orders; the finite-difference scheme uses centred
    /// second-order periodic stencils.
    pub fn derivative(&self, order: u32, scheme: Scheme) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        Ok(match scheme {
            Scheme::Spectral => self.spectral_derivative(order),
            Scheme::FiniteDifference => self.fd_derivative(order),
        })
    }

    /// Spectral first derivative.
    pub fn dx(&self) -> Self {
        self.spectral_derivative(1)
    }

    /// Spectral second derivative.
    pub fn dxx(&self) -> Self {
        self.spectral_derivative(2)
    }

    pub(crate) fn spectral_derivative(&self, order: u32) -> Self {
        let n = self.n();
        // the mean carries no derivative; removing it first keeps its FFT
        // roundoff from leaking into the high modes the multiplier amplifies
        let mean = self.mean();
        let centred: Vec<f64> = self.values.iter().map(|v| v - mean).collect();
        let mut c = fourier::forward(&centred);
        c[0] = Complex64::new(0.0, 0.0);
        for (j, cj) in c.iter_mut().enumerate() {
            let k = fourier::wavenumber(j, n);
            if order % 2 == 1 && 2 * k == n as i64 {
                *cj = Complex64::new(0.0, 0.0);
                continue;
            }
            let ik = Complex64::new(0.0, 2.0 * PI * k as f64);
            *cj *= ik.powu(order);
        }
        Self::from_raw(fourier::inverse(&c))
    }

    fn fd_derivative(&self, order: u32) -> Self {
        let n = self.n();
        let h = 1.0 / n as f64;
        let f = |j: isize| self.values[j.rem_euclid(n as isize) as usize];
        let out = (0..n as isize)
            .map(|j| match order {
                1 => (f(j + 1) - f(j - 1)) / (2.0 * h),
                2 => (f(j + 1) - 2.0 * f(j) + f(j - 1)) / (h * h),
                _ => (f(j + 2) - 2.0 * f(j + 1) + 2.0 * f(j - 1) - f(j - 2)) / (2.0 * h * h * h),
            })
            .collect();
        Self::from_raw(out)
    }

    pub fn interpolator(&self, kind: Interpolant) -> Interpolator {
        match kind {
            Interpolant::Trig => Interpolator::Trig(TrigInterpolator::new(&self.values)),
            Interpolant::Spline => Interpolator::Spline(SplineInterpolator::new(&self.values)),
        }
    }

    /// Values of the interpolant at arbitrary real points (wrapped mod 1).
    pub fn evaluate(&self, points: &[f64], kind: Interpolant) -> Vec<f64> {
        let interp = self.interpolator(kind);
        points.iter().map(|&x| interp.value(x)).collect()
    }

    /// Grid samples of `f(phi(x_j))`.
    pub fn compose(&self, phi: &DiffeoS1, kind: Interpolant) -> Result<Self> {
        if phi.n() != self.n() {
            return Err(Error::GridMismatch { left: self.n(), right: phi.n() });
        }
        let points: Vec<f64> = phi.lift_values();
        Self::new(self.evaluate(&points, kind))
    }
}

impl Add for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn add(self, rhs: &PeriodicFunction) -> PeriodicFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn sub(self, rhs: &PeriodicFunction) -> PeriodicFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Pointwise product.
impl Mul for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn mul(self, rhs: &PeriodicFunction) -> PeriodicFunction {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Mul<&PeriodicFunction> for f64 {
    type Output = PeriodicFunction;
    fn mul(self, rhs: &PeriodicFunction) -> PeriodicFunction {
        rhs.scale(self)
    }
}

impl Neg for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn neg(self) -> PeriodicFunction {
        self.scale(-1.0)
    }
}

/// Prepared interpolant, reusable across many evaluation points.
#[derive(Debug, Clone)]
pub enum Interpolator {
    Trig(TrigInterpolator),
    Spline(SplineInterpolator),
}

impl Interpolator {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Interpolator::Trig(t) => t.value_and_slope(x).0,
            Interpolator::Spline(s) => s.value_and_slope(x).0,
        }
    }

    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        match self {
            Interpolator::Trig(t) => t.value_and_slope(x),
            Interpolator::Spline(s) => s.value_and_slope(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrigInterpolator {
    n: usize,
    /// Coefficients for `k = 0..=n/2`.
    coeffs: Vec<Complex64>,
}

impl TrigInterpolator {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let c = fourier::forward(values);
        Self { n, coeffs: c[..=n / 2].to_vec() }
    }

    fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let half = self.n / 2;
        let theta = 2.0 * PI * x.rem_euclid(1.0);
        let step = Complex64::cis(theta);
        let mut z = Complex64::new(1.0, 0.0);
        let mut value = self.coeffs[0].re;
        let mut slope = 0.0;
        for k in 1..half {
            // resynchronise the running power to bound drift
            if k % 32 == 0 {
                z = Complex64::cis(theta * k as f64);
            } else {
                z *= step;
            }
            let term = self.coeffs[k] * z;
            value += 2.0 * term.re;
            slope -= 2.0 * 2.0 * PI * k as f64 * term.im;
        }
        let arg = theta * half as f64;
        value += self.coeffs[half].re * arg.cos();
        slope -= self.coeffs[half].re * PI * self.n as f64 * arg.sin();
        (value, slope)
    }
}

#[derive(Debug, Clone)]
pub struct SplineInterpolator {
    values: Vec<f64>,
    /// Second derivatives at the nodes.
    curvature: Vec<f64>,
}

impl SplineInterpolator {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let h = 1.0 / n as f64;
        // M_{j-1} + 4 M_j + M_{j+1} = 6 (f_{j+1} - 2 f_j + f_{j-1}) / h^2 is circulant;
        // solve it mode by mode.
        let mut c = fourier::forward(values);
        for (j, cj) in c.iter_mut().enumerate() {
            let cos = (2.0 * PI * j as f64 / n as f64).cos();
            *cj *= 6.0 / (h * h) * (2.0 * cos - 2.0) / (4.0 + 2.0 * cos);
        }
        Self { values: values.to_vec(), curvature: fourier::inverse(&c) }
    }

    fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let n = self.values.len();
        let h = 1.0 / n as f64;
        let s = x.rem_euclid(1.0) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        let j = (i + 1) % n;
        let (fi, fj) = (self.values[i], self.values[j]);
        let (mi, mj) = (self.curvature[i], self.curvature[j]);
        let a = 1.0 - t;
        let value = a * fi + t * fj + h * h / 6.0 * ((a * a * a - a) * mi + (t * t * t - t) * mj);
        let slope = (fj - fi) / h + h / 6.0 * ((1.0 - 3.0 * a * a) * mi + (3.0 * t * t - 1.0) * mj);
        (value, slope)
    }
}

/// Settings for [`DiffeoS1::invert`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub slope_floor: f64,
    pub tol: f64,
    pub interpolant: Interpolant,
    pub max_iter: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            slope_floor: DEFAULT_SLOPE_FLOOR,
            tol: DEFAULT_INVERSION_TOL,
            interpolant: Interpolant::Trig,
            max_iter: 100,
        }
    }
}

/// Orientation-preserving circle diffeomorphism with lift `x + p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoS1 {
    displacement: PeriodicFunction,
    min_slope: f64,
}

impl DiffeoS1 {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_displacement(PeriodicFunction::zeros(n)?)
    }

    /// Rigid rotation `x -> x + c`.
    pub fn rotation(n: usize, c: f64) -> Result<Self> {
        Self::from_displacement(PeriodicFunction::constant(n, c)?)
    }

    /// Rejects displacements whose lift is not strictly increasing at the nodes.
    pub fn from_displacement(displacement: PeriodicFunction) -> Result<Self> {
        let min_slope = displacement.dx().min() + 1.0;
        if !(min_slope > 0.0) {
            return Err(Error::SlopeCollapse { min_slope, floor: 0.0 });
        }
        Ok(Self { displacement, min_slope })
    }

    pub fn n(&self) -> usize {
        self.displacement.n()
    }

    pub fn displacement(&self) -> &PeriodicFunction {
        &self.displacement
    }

    /// Minimum over the nodes of the spectral derivative of the lift.
    pub fn min_slope(&self) -> f64 {
        self.min_slope
    }

    /// `phi_x = 1 + p_x`.
    pub fn slope(&self) -> PeriodicFunction {
        self.displacement.dx().map(|v| 1.0 + v)
    }

    /// `phi_xx = p_xx`.
    pub fn curvature(&self) -> PeriodicFunction {
        self.displacement.dxx()
    }

    /// Lift values `x_j + p_j`.
    pub fn lift_values(&self) -> Vec<f64> {
        let n = self.n();
        self.displacement
            .values()
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 / n as f64 + p)
            .collect()
    }

    pub fn check_slope(&self, floor: f64) -> Result<()> {
        if self.min_slope <= floor {
            return Err(Error::SlopeCollapse { min_slope: self.min_slope, floor });
        }
        Ok(())
    }

    /// Group product `self o inner`.
    pub fn compose(&self, inner: &DiffeoS1, kind: Interpolant) -> Result<Self> {
        let outer = self.displacement.compose(inner, kind)?;
        Self::from_displacement(&outer + &inner.displacement)
    }

    /// Inverse diffeomorphism by safeguarded Newton iteration on the monotone lift.
    pub fn invert(&self, opts: &InversionOptions) -> Result<Self> {
        self.check_slope(opts.slope_floor)?;
        let n = self.n();
        let interp = self.displacement.interpolator(opts.interpolant);
        let reach = self.displacement.sup_norm() + 1.0 / n as f64;
        let mut out = Vec::with_capacity(n);
        for (j, &pj) in self.displacement.values().iter().enumerate() {
            let y = j as f64 / n as f64;
            let x = solve_monotone(&interp, y, y - pj, reach, opts)
                .map_err(|residual| Error::InversionFailed { node: j, residual })?;
            out.push(x - y);
        }
        Self::from_displacement(PeriodicFunction::new(out)?)
    }
}

/// Solves `x + p(x) = y` for the increasing lift, starting from `guess`.
/// On failure returns the final residual.
fn solve_monotone(
    interp: &Interpolator,
    y: f64,
    guess: f64,
    reach: f64,
    opts: &InversionOptions,
) -> std::result::Result<f64, f64> {
    let g = |x: f64| {
        let (p, dp) = interp.value_and_slope(x);
        (x + p - y, 1.0 + dp)
    };
    let mut lo = y - reach;
    let mut hi = y + reach;
    let mut widen = reach.max(1e-3);
    while g(lo).0 > 0.0 {
        lo -= widen;
        widen *= 2.0;
    }
    widen = reach.max(1e-3);
    while g(hi).0 < 0.0 {
        hi += widen;
        widen *= 2.0;
    }
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (gx, slope) = g(x);
        residual = gx.abs();
        if residual <= 1e-2 * opts.tol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / slope;
        x = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let final_res = g(x).0.abs();
    if final_res <= opts.tol {
        Ok(x)
    } else {
        Err(final_res.min(residual))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau() -> f64 {
        2.0 * PI
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(PeriodicFunction::zeros(7), Err(Error::InvalidGridSize(7)));
        assert_eq!(PeriodicFunction::zeros(6), Err(Error::InvalidGridSize(6)));
        assert!(matches!(
            PeriodicFunction::new(vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::NonFinite { index: 2 })
        ));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(PeriodicFunction::constant(16, 1.0).unwrap().mean(), 1.0);
        let s = PeriodicFunction::from_fn(64, |x| (tau() * x).sin()).unwrap();
        assert!(s.mean().abs() <= 1e-15);
        let c = PeriodicFunction::from_fn(64, |x| 0.5 + 0.1 * (tau() * x).cos()).unwrap();
        assert!((c.mean() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn spectral_derivative_of_single_mode() {
        let f = PeriodicFunction::from_fn(64, |x| (tau() * x).cos()).unwrap();
        let exact = PeriodicFunction::from_fn(64, |x| -tau() * (tau() * x).sin()).unwrap();
        let d = f.derivative(1, Scheme::Spectral).unwrap();
        assert!(d.sup_diff(&exact) <= 1e-12);
        let c = PeriodicFunction::constant(32, 2.5).unwrap();
        for scheme in [Scheme::Spectral, Scheme::FiniteDifference] {
            assert!(c.derivative(2, scheme).unwrap().sup_norm() <= 1e-12);
        }
    }

    #[test]
    fn finite_difference_is_second_order() {
        let exact = |n| PeriodicFunction::from_fn(n, |x| 4.0 * PI * (4.0 * PI * x).cos()).unwrap();
        let err = |n: usize| {
            let f = PeriodicFunction::from_fn(n, |x| (4.0 * PI * x).sin()).unwrap();
            let fd = f.derivative(1, Scheme::FiniteDifference).unwrap();
            let sp = f.derivative(1, Scheme::Spectral).unwrap();
            assert!(sp.sup_diff(&exact(n)) < 1e-10);
            fd.sup_diff(&sp)
        };
        let (e1, e2) = (err(128), err(256));
        // leading error (4 pi)^3 h^2 / 6
        let predicted = (4.0 * PI).powi(3) / 6.0 / (128.0f64 * 128.0);
        assert!((e1 / predicted - 1.0).abs() < 0.01, "{e1} vs {predicted}");
        assert!((e1 / e2 - 4.0).abs() < 0.05);
    }

    #[test]
    fn third_order_fd_stencil() {
        let n = 256;
        let f = PeriodicFunction::from_fn(n, |x| (tau() * x).sin()).unwrap();
        let exact = PeriodicFunction::from_fn(n, |x| -tau().powi(3) * (tau() * x).cos()).unwrap();
        let fd = f.derivative(3, Scheme::FiniteDifference).unwrap();
        assert!(fd.sup_diff(&exact) / exact.sup_norm() < 1e-3);
        let sp = f.derivative(3, Scheme::Spectral).unwrap();
        assert!(sp.sup_diff(&exact) / exact.sup_norm() < 1e-9);
    }

    #[test]
    fn invalid_order_rejected() {
        let f = PeriodicFunction::zeros(8).unwrap();
        assert_eq!(f.derivative(0, Scheme::Spectral), Err(Error::InvalidOrder(0)));
        assert_eq!(f.derivative(4, Scheme::FiniteDifference), Err(Error::InvalidOrder(4)));
    }

    #[test]
    fn odd_derivative_zeroes_nyquist() {
        let f = PeriodicFunction::from_fn(16, |x| (16.0 * PI * x).cos()).unwrap();
        assert!(f.dx().sup_norm() < 1e-12);
        let d2 = f.dxx();
        assert!((d2.values()[0] + (16.0 * PI).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn evaluate_reproduces_nodes() {
        let f = PeriodicFunction::from_fn(32, |x| (x * 7.3).sin() + x * x).unwrap();
        for kind in [Interpolant::Trig, Interpolant::Spline] {
            let vals = f.evaluate(&nodes(32), kind);
            for (a, b) in vals.iter().zip(f.values()) {
                assert!((a - b).abs() <= 1e-14, "{kind:?}");
            }
        }
    }

    #[test]
    fn trig_interpolant_is_exact_for_band_limited_data() {
        let f = PeriodicFunction::from_fn(16, |x| (tau() * x).cos()).unwrap();
        let v = f.evaluate(&[0.125, 1.125, -0.875], Interpolant::Trig);
        for val in v {
            assert!((val - 0.5f64.sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn spline_converges_at_fourth_order() {
        let g = |x: f64| (tau() * x).sin();
        let err = |n: usize| {
            let f = PeriodicFunction::from_fn(n, g).unwrap();
            let pts: Vec<f64> = (0..97).map(|i| (i as f64 + 0.31) / 97.0).collect();
            let v = f.evaluate(&pts, Interpolant::Spline);
            pts.iter().zip(&v).fold(0.0f64, |m, (x, y)| m.max((g(*x) - y).abs()))
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn interpolant_slope_matches_derivative() {
        let f = PeriodicFunction::from_fn(64, |x| 0.1 * (tau() * x).sin() + 0.05 * (3.0 * tau() * x).cos()).unwrap();
        let df = |x: f64| 0.1 * tau() * (tau() * x).cos() - 0.15 * tau() * (3.0 * tau() * x).sin();
        let interp = f.interpolator(Interpolant::Trig);
        for x in [0.013, 0.4, 0.77] {
            assert!((interp.value_and_slope(x).1 - df(x)).abs() < 1e-12);
        }
        let interp = f.interpolator(Interpolant::Spline);
        for x in [0.013, 0.4, 0.77] {
            assert!((interp.value_and_slope(x).1 - df(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn compose_examples() {
        let n = 64;
        let f = PeriodicFunction::from_fn(n, |x| (tau() * x).cos()).unwrap();
        let id = DiffeoS1::identity(n).unwrap();
        assert!(f.compose(&id, Interpolant::Trig).unwrap().sup_diff(&f) <= 1e-14);

        let phi = DiffeoS1::from_displacement(PeriodicFunction::from_fn(n, |x| 0.1 * (tau() * x).sin()).unwrap()).unwrap();
        let one = PeriodicFunction::constant(n, 1.0).unwrap();
        assert!(one.compose(&phi, Interpolant::Trig).unwrap().sup_diff(&one) <= 1e-14);

        let rot = DiffeoS1::rotation(n, 0.25).unwrap();
        let shifted = f.compose(&rot, Interpolant::Trig).unwrap();
        let expected = PeriodicFunction::from_fn(n, |x| -(tau() * x).sin()).unwrap();
        assert!(shifted.sup_diff(&expected) <= 1e-12);
    }

    #[test]
    fn compose_rejects_mismatch() {
        let f = PeriodicFunction::zeros(16).unwrap();
        let id = DiffeoS1::identity(32).unwrap();
        assert_eq!(f.compose(&id, Interpolant::Trig), Err(Error::GridMismatch { left: 16, right: 32 }));
    }

    #[test]
    fn invert_examples() {
        let n = 32;
        let opts = InversionOptions::default();
        let id = DiffeoS1::identity(n).unwrap();
        assert!(id.invert(&opts).unwrap().displacement().sup_norm() <= 1e-15);

        let rot = DiffeoS1::rotation(n, 0.3).unwrap();
        let inv = rot.invert(&opts).unwrap();
        for p in inv.displacement().values() {
            assert!((p + 0.3).abs() <= 1e-12);
        }
    }

    #[test]
    fn invert_round_trip_on_nodes() {
        let n = 256;
        let phi = DiffeoS1::from_displacement(PeriodicFunction::from_fn(n, |x| 0.1 * (tau() * x).sin()).unwrap()).unwrap();
        let inv = phi.invert(&InversionOptions::default()).unwrap();
        // phi^{-1}(phi(x_j)) evaluated through the inverse's interpolant
        let lifts = phi.lift_values();
        let back = inv.displacement().evaluate(&lifts, Interpolant::Trig);
        let worst = lifts
            .iter()
            .zip(&back)
            .enumerate()
            .fold(0.0f64, |m, (j, (y, q))| m.max((y + q - j as f64 / n as f64).abs()));
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn invert_rejects_collapsed_slope() {
        let n = 64;
        // slope 1 - 0.999999999... approaches zero at x = 0.5
        let amp = (1.0 - 1e-9) / tau();
        let phi = DiffeoS1::from_displacement(PeriodicFunction::from_fn(n, |x| amp * (tau() * x).sin()).unwrap()).unwrap();
        assert!(phi.min_slope() < 1e-8);
        assert!(matches!(phi.invert(&InversionOptions::default()), Err(Error::SlopeCollapse { .. })));
    }

    #[test]
    fn non_monotone_lift_rejected() {
        let p = PeriodicFunction::from_fn(64, |x| 0.3 * (tau() * x).sin()).unwrap();
        assert!(matches!(DiffeoS1::from_displacement(p), Err(Error::SlopeCollapse { .. })));
    }

    #[test]
    fn rotations_form_a_group() {
        let a = DiffeoS1::rotation(16, 0.3).unwrap();
        let b = DiffeoS1::rotation(16, 0.45).unwrap();
        let ab = a.compose(&b, Interpolant::Trig).unwrap();
        for p in ab.displacement().values() {
            assert!((p - 0.75).abs() <= 1e-15);
        }
    }
}
