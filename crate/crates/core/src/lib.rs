//! Simulation and verification of central limit theorems for window
//! integrals of stationary, weakly dependent random fields.
//!
//! * [`windows`]: box windows, Van Hove ratios and inner unit-cube lattices.
//! * [`fields`]: shot-noise, lattice moving-average and Gaussian grid fields.
//! * [`dependence`]: dependence-coefficient sequences and their transforms.
//! * [`bvdecomp`]: Jordan decomposition of piecewise monotone functions.
//! * [`estimation`]: window integrals, block statistics, asymptotic variances.
//! * [`harness`]: Monte Carlo CLT experiments with Kolmogorov-Smirnov checks.
//! * [`quadrature`], [`stats`], [`rng`]: numerical support.

pub mod bvdecomp;
pub mod dependence;
pub mod error;
pub mod estimation;
pub mod fields;
pub mod harness;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod windows;

pub use error::{Error, Result};
