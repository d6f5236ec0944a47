//! Numerical toolkit for the sigma_2 curvature of conformal metrics on the
//! round sphere: elementary symmetric function algebra on eigenvalue profiles
//! and symmetric matrices, pointwise Schouten eigenvalues of rotationally
//! symmetric conformal factors, weighted quadrature of the associated integral
//! functionals, a volume-normalized curvature flow that drives a metric toward
//! constant (subcritical) sigma_2, and scripted sweeps over the explicit
//! `e^{-2*l*s^2}` sphere family.

pub mod experiments;
pub mod flow;
pub mod functionals;
pub mod grid;
pub mod sphere;
pub mod symfunc;

pub use grid::{ConformalFactor, Grid};
pub use sphere::Convention;
