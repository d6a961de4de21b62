//! Total energy-momenta of (4+1)-dimensional asymptotically anti-de Sitter
//! initial data and the positive-energy lower bounds they satisfy.
//!
//! The crate is organised bottom-up:
//!
//! * [`clifford`] – the fixed 4×4 gamma-matrix representation, spinor
//!   bilinears and the Weitzenböck curvature term.
//! * [`geometry`] – the hyperbolic slice: frame factors, sphere measure,
//!   spin connection, spherical quadrature and radial extrapolation.
//! * [`spinors`] – closed-form imaginary Killing spinors and a residual check
//!   of the Killing spinor equation.
//! * [`killing`] – the fifteen AdS Killing fields and a Lie-derivative check.
//! * [`initial_data`] – perturbation models, mass/momentum aspects, decay
//!   validation and the sampled-grid file format.
//! * [`charges`] – surface-integral charges and derived scalars.
//! * [`qmatrix`] – the Hermitian charge matrix, positivity checks, the lower
//!   bounds on the energy and the spinor boundary identity.

pub mod charges;
pub mod clifford;
pub mod error;
pub mod geometry;
pub mod initial_data;
pub mod killing;
pub mod qmatrix;
pub mod spinors;

pub use error::{Error, Result};
pub use num_complex::Complex64;
