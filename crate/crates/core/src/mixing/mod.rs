//! Cylinder families and restricted-family estimators for the mixing
//! coefficients, plus the adaptedness residuals linking mixing rates to
//! return sequences.
//!
//! All estimates are suprema over declared finite families of cylinders and
//! test intervals, hence lower bounds for the coefficients.

mod cylinder;
mod estimate;
mod residual;

pub use cylinder::{cylinder_interval, cylinder_prob, test_intervals, Cylinder, CylinderFamily, FibredSystem, StationaryLaw};
pub use estimate::{estimate_coefficient, fit_exponential_decay, CoefficientKind, JointCounts, MixingEstimate, MonteCarlo};
pub use residual::{adaptedness_residual, condition26_residual, ResidualRow, ResidualSeries, TrendVerdict};
