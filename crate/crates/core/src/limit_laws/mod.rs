//! Mittag-Leffler and one-sided stable laws, LIL constants, and
//! Kolmogorov-Smirnov statistics.

mod ks;
mod lil;
mod stable;

pub use ks::{dkw_threshold, ks_distance, ks_two_sample, two_sample_threshold};
pub use lil::{lil_constants, LilConstants};
pub use stable::{ml_cdf, ml_moment, ml_sample, stable_cdf, stable_laplace, stable_sample, stable_sf, MittagLefflerDist, PositiveStableDist};
