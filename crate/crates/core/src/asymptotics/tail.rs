use crate::error::{Error, Result};
use crate::maps::IntervalMapSystem;
use crate::numeric::{dyadic_grid, least_squares};

/// Preimages of the leftmost partition point under the neutral branch.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralTail {
    /// `q_n = tau_n - location` for `n = 1..=n_max`.
    pub q: Vec<f64>,
    /// Slope of `log q_n` against `log n` over the upper two decades.
    pub slope: f64,
    /// `q_n (kappa n / gamma)^gamma` at `n_max`.
    pub scaled_last: f64,
}

impl NeutralTail {
    pub fn scaled(&self, n: usize, gamma: f64, kappa: f64) -> f64 {
        self.q[n - 1] * (kappa * n as f64 / gamma).powf(gamma)
    }
}

pub fn neutral_tail(system: &IntervalMapSystem, n_max: usize) -> Result<NeutralTail> {
    let np = system
        .neutral_point()
        .ok_or_else(|| Error::InvalidArgument("map has no indifferent fixed point".into()))?;
    let q = system.neutral_preimages(n_max)?;
    let lo = (n_max / 100).max(1) as u64;
    let grid = dyadic_grid(lo, n_max as u64);
    let xs: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = grid.iter().map(|&n| q[n as usize - 1].ln()).collect();
    let slope = least_squares(&xs, &ys).map(|(_, s)| s).unwrap_or(f64::NAN);
    let tail = NeutralTail { q, slope, scaled_last: 0.0 };
    let scaled_last = tail.scaled(n_max, np.gamma, np.kappa);
    Ok(NeutralTail { scaled_last, ..tail })
}
