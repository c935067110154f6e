//! Numerical laboratory for infinite ergodic theory.
//!
//! The crate builds piecewise monotone interval maps with indifferent fixed
//! points, their first-return (induced) systems and Kakutani towers, the
//! transfer operators acting on densities, the Mittag-Leffler and one-sided
//! stable laws, and Monte Carlo drivers that check the Darling-Kac, stable
//! limit, one-sided LIL, renewal and moment-set asymptotics.
//!
//! Modules:
//! - [`maps`]: interval maps, orbits, inducing, towers.
//! - [`transfer`]: transfer operator, Ulam discretisation, dual ergodic averages.
//! - [`limit_laws`]: Mittag-Leffler / positive stable laws, LIL constants, KS.
//! - [`asymptotics`]: return sequences, regular variation, wandering rates, renewal.
//! - [`mixing`]: cylinder families and mixing-coefficient estimators.
//! - [`experiments`]: configs, seeded parallel runs, result tables, CLI backends.

pub mod asymptotics;
pub mod error;
pub mod experiments;
pub mod limit_laws;
pub mod maps;
pub mod mixing;
pub mod numeric;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
pub use maps::{Interval, IntervalMapSystem};
