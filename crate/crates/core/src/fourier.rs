//! Thin FFT layer over `rustfft` with the normalisation used throughout the crate.
//!
//! Coefficients are `c_k = (1/n) sum_j f_j exp(-2 pi i k j / n)`, stored in FFT bin
//! order, so `f_j = sum_k c_k exp(2 pi i k j / n)`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed wavenumber of FFT bin `j` on an `n`-point grid. The Nyquist bin maps to `+n/2`.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse of [`forward`]; returns the real part.
pub fn inverse(coeffs: &[Complex64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Samples the trigonometric interpolant of `values` on a grid `factor` times finer.
///
/// The Nyquist coefficient is split evenly between `+n/2` and `-n/2` so the
/// refined samples come from the real interpolant `c_{n/2} cos(pi n x)`.
pub fn refine(values: &[f64], factor: usize) -> Vec<f64> {
    let n = values.len();
    let m = n * factor;
    if factor == 1 {
        return values.to_vec();
    }
    let c = forward(values);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    padded[..half].copy_from_slice(&c[..half]);
    for j in half + 1..n {
        padded[m - n + j] = c[j];
    }
    padded[half] = c[half] * 0.5;
    padded[m - half] = c[half] * 0.5;
    inverse(&padded)
}

/// Zeroes every mode with `|k| > n/3` (the 2/3 rule).
pub fn truncate_two_thirds(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut c = forward(values);
    let cutoff = n as i64 / 3;
    for (j, cj) in c.iter_mut().enumerate() {
        if wavenumber(j, n).abs() > cutoff {
            *cj = Complex64::new(0.0, 0.0);
        }
    }
    inverse(&c)
}
