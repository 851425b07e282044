//! Numerical laboratory for the periodic muDP equation
//! `mu(u_t) - u_txx + 3 mu(u) u_x - 3 u_x u_xx - u u_xxx = 0` on the circle,
//! integrated both as a PDE and as a geodesic flow on the circle
//! diffeomorphism group.

pub mod error;
pub mod expmap;
pub mod flows;
pub mod fourier;
pub mod grid;
pub mod operators;
pub mod samples;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{DiffeoS1, Interpolant, InversionOptions, PeriodicFunction, Scheme};
pub use operators::{ConjugationStrategy, InverseRealization, Operators, RhsMode};
pub use samples::TrigPolynomial;
pub use flows::{FlowState, SolverConfig, Termination, Trajectory};
pub use expmap::{ExpJacobian, VariationalMethod, VariationalOptions};
pub use validate::{Check, ValidateOptions};
