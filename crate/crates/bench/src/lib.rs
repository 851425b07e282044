//! Shared inputs for the benchmarks.

use std::f64::consts::PI;

use mudp_core::{DiffeoS1, FlowState, PeriodicFunction};

pub fn reference_u0(n: usize) -> PeriodicFunction {
    PeriodicFunction::from_fn(n, |x| 0.2 + 0.05 * (2.0 * PI * x).cos()).expect("valid grid")
}

/// `x + 0.05 sin(2 pi x)`.
pub fn wavy_diffeo(n: usize) -> DiffeoS1 {
    let p = PeriodicFunction::from_fn(n, |x| 0.05 * (2.0 * PI * x).sin()).expect("valid grid");
    DiffeoS1::from_displacement(p).expect("increasing lift")
}

pub fn wavy_state(n: usize) -> FlowState {
    FlowState::new(wavy_diffeo(n), reference_u0(n), 0.0).expect("matching grids")
}
