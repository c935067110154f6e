use super::ReturnSequence;
use crate::error::{Error, Result};
use crate::numeric::gamma;

/// Bound on the neglected Laplace tail.
pub const LAPLACE_TAIL_TOL: f64 = 1e-12;

/// `u(lambda) = sum_{n>=0} e^{-lambda n} (a(n+1) - a(n))` with `a(0) = 0`.
///
/// The sequence must have full resolution. Fails with `TruncationTooCoarse`
/// when the neglected tail, bounded through the largest increment, exceeds
/// `1e-12`.
pub fn laplace_u(a: &ReturnSequence, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    if !a.is_full_resolution() || a.is_empty() {
        return Err(Error::InvalidArgument("Laplace transform needs a(n) at every n".into()));
    }
    let vals = a.values();
    let q = (-lambda).exp();
    let mut weight = 1.0;
    let mut prev = 0.0;
    let mut sum = 0.0;
    let mut bound: f64 = 0.0;
    for &v in vals {
        let inc = v - prev;
        bound = bound.max(inc);
        sum += weight * inc;
        weight *= q;
        prev = v;
    }
    let tail = bound.max(1.0) * weight / (1.0 - q);
    if tail > LAPLACE_TAIL_TOL {
        return Err(Error::TruncationTooCoarse { lambda });
    }
    Ok(sum)
}

/// `c(lambda) = E(1 - e^{-lambda phi})` over return-time samples.
pub fn laplace_c(samples: &[u64], lambda: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().map(|&p| -(-lambda * p as f64).exp_m1()).sum::<f64>() / samples.len() as f64
}

/// One evaluation of the renewal identity `c(lambda) u(lambda) -> 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalRow {
    pub lambda: f64,
    pub c: f64,
    /// Laplace transform of the increments of `a`.
    pub u: f64,
    /// `1 + e^{-lambda} u`: the transform of visit probabilities including
    /// the visit at time 0.
    pub u_with_origin: f64,
    pub residual: f64,
    pub residual_with_origin: f64,
}

pub fn renewal_residual(a: &ReturnSequence, samples: &[u64], lambda: f64) -> Result<RenewalRow> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no return-time samples".into()));
    }
    let u = laplace_u(a, lambda)?;
    let c = laplace_c(samples, lambda);
    let u0 = 1.0 + (-lambda).exp() * u;
    Ok(RenewalRow { lambda, c, u, u_with_origin: u0, residual: c * u - 1.0, residual_with_origin: c * u0 - 1.0 })
}

/// `L(n) = E min(phi, n)` at each grid point.
pub fn wandering_rate(samples: &[u64], n_grid: &[u64]) -> Vec<f64> {
    let len = samples.len().max(1) as f64;
    n_grid
        .iter()
        .map(|&n| samples.iter().map(|&p| p.min(n) as f64).sum::<f64>() / len)
        .collect()
}

/// `A(n) = n / (Gamma(2-g) Gamma(1+g) E(phi ∧ n))`.
pub fn identify_a(g: f64, truncated_means: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let k = gamma(2.0 - g) * gamma(1.0 + g);
    truncated_means.iter().map(|&(n, m)| (n, n as f64 / (k * m))).collect()
}
