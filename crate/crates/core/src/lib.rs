//! Divergence-curve bounds and variational limit-cycle search for planar
//! polynomial vector fields `x' = P(x, y), y' = Q(x, y)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`poly`]: sparse bivariate polynomials, parsing, interval enclosures,
//!   divergence and contact systems.
//! - [`solver2d`]: certified root isolation for 2x2 polynomial systems.
//! - [`implicit_curve`]: zero-set tracing, component census, singular points.
//! - [`bounds`]: Harnack, Bezout and the limit-cycle counting formulas.
//! - [`variational`]: discretized periodic paths, the energy functionals,
//!   descent, Hessian spectra and Morse bookkeeping.
//! - [`ode_oracle`]: RK4 integration and Poincare-map cycle finding.

pub mod bounds;
pub mod implicit_curve;
pub mod ode_oracle;
pub mod poly;
pub mod solver2d;
pub mod variational;

pub use poly::{BivariatePoly, Box2, Degree, Interval, PlanarSystem, PolyError, Var, VectorField};
