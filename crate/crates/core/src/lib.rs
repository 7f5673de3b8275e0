//! Discrete fractional perimeter with a potential: lattice sets, Riesz-kernel
//! quadrature, nonlocal curvature and volume-constrained minimization.

pub mod curvature;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod minimizer;
pub mod oracle;
pub mod perimeter;
pub mod potential;

pub use error::{Error, Result};
