//! Return sequences and their asymptotics.

mod renewal;
mod sequence;
mod tail;

pub use renewal::{identify_a, laplace_c, laplace_u, renewal_residual, wandering_rate, RenewalRow};
pub use sequence::{
    asymptotic_inverse, correlation_a, empirical_a, fit_regvar, InverseValue, RegVarFit, ReturnSequence, SequenceSource,
};
pub use tail::{neutral_tail, NeutralTail};
