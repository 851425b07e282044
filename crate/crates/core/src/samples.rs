//! Deterministic smooth test data: trigonometric polynomials with known
//! analytic values and derivatives.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::PeriodicFunction;

/// `mean + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)`, `k = 1..=degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn constant(c: f64) -> Self {
        Self { mean: c, cos: Vec::new(), sin: Vec::new() }
    }

    /// Builds from `(k, cos-coeff, sin-coeff)` triples; repeated `k` accumulate.
    pub fn from_modes(modes: &[(usize, f64, f64)]) -> Self {
        let degree = modes.iter().map(|m| m.0).max().unwrap_or(0);
        let mut p = Self { mean: 0.0, cos: vec![0.0; degree], sin: vec![0.0; degree] };
        for &(k, a, b) in modes {
            if k == 0 {
                p.mean += a;
            } else {
                p.cos[k - 1] += a;
                p.sin[k - 1] += b;
            }
        }
        p
    }

    /// Random polynomial with `|mean| <= mean_bound` and every oscillatory
    /// coefficient uniform in `[-coeff_bound, coeff_bound]`.
    pub fn random(seed: u64, degree: usize, mean_bound: f64, coeff_bound: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = rng.gen_range(-mean_bound..=mean_bound);
        let cos = (0..degree).map(|_| rng.gen_range(-coeff_bound..=coeff_bound)).collect();
        let sin = (0..degree).map(|_| rng.gen_range(-coeff_bound..=coeff_bound)).collect();
        Self { mean, cos, sin }
    }

    /// Random polynomial whose oscillatory part has sup norm at most `amplitude`.
    pub fn random_bounded(seed: u64, degree: usize, mean_bound: f64, amplitude: f64) -> Self {
        let mut p = Self::random(seed, degree, mean_bound, 1.0);
        let total: f64 = p.cos.iter().chain(&p.sin).map(|c| c.abs()).sum();
        if total > 0.0 {
            let s = amplitude / total;
            p.cos.iter_mut().chain(p.sin.iter_mut()).for_each(|c| *c *= s);
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    /// `order`-th derivative at `x` (order 0 is the value).
    pub fn derivative_at(&self, x: f64, order: u32) -> f64 {
        let mut acc = if order == 0 { self.mean } else { 0.0 };
        for (i, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = 2.0 * PI * (i + 1) as f64;
            let (s, c) = (w * x).sin_cos();
            // d^m/dx^m of (a cos + b sin) cycles with period 4
            let d = match order % 4 {
                0 => a * c + b * s,
                1 => -a * s + b * c,
                2 => -a * c - b * s,
                _ => a * s - b * c,
            };
            acc += w.powi(order as i32) * d;
        }
        acc
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.derivative_at(x, 0)
    }

    pub fn sample(&self, n: usize) -> Result<PeriodicFunction> {
        PeriodicFunction::from_fn(n, |x| self.value_at(x))
    }

    pub fn sample_derivative(&self, n: usize, order: u32) -> Result<PeriodicFunction> {
        PeriodicFunction::from_fn(n, |x| self.derivative_at(x, order))
    }
}
