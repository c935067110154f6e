use std::f64::consts::LN_2;

use super::{Conditions, Interval, NeutralPoint, PiecewiseMap};
use crate::error::{Error, Result};

const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
const UPPER_HALF: Interval = Interval { lo: 0.5, hi: 1.0 };

/// Boole-like map `x/(1-x)` on `(0, 1/2)`, `2x - 1` on `(1/2, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BooleMap;

impl BooleMap {
    /// Orbits below this point are fast-forwarded.
    pub const ZONE_EDGE: f64 = 0.25;
}

impl PiecewiseMap for BooleMap {
    fn name(&self) -> String {
        "boole_like".into()
    }

    fn domain(&self) -> Interval {
        UNIT
    }

    fn branch_count(&self) -> Option<usize> {
        Some(2)
    }

    fn branch_domain(&self, i: usize) -> Option<Interval> {
        match i {
            0 => Some(Interval { lo: 0.0, hi: 0.5 }),
            1 => Some(UPPER_HALF),
            _ => None,
        }
    }

    fn branch_image(&self, _i: usize) -> Interval {
        UNIT
    }

    fn locate(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutsideDomain { x, lo: 0.0, hi: 1.0 });
        }
        Ok(usize::from(x >= 0.5))
    }

    #[inline]
    fn forward(&self, i: usize, x: f64) -> f64 {
        if i == 0 {
            x / (1.0 - x)
        } else {
            2.0 * x - 1.0
        }
    }

    fn derivative(&self, i: usize, x: f64) -> f64 {
        if i == 0 {
            1.0 / ((1.0 - x) * (1.0 - x))
        } else {
            2.0
        }
    }

    fn inverse(&self, i: usize, y: f64) -> Option<f64> {
        Some(if i == 0 { y / (1.0 + y) } else { 0.5 * (y + 1.0) })
    }

    fn exact_preimages(&self) -> bool {
        true
    }

    fn ref_density(&self, x: f64) -> f64 {
        1.0 / x
    }

    fn density_integrable(&self) -> bool {
        false
    }

    fn conditions(&self) -> Conditions {
        Conditions { adler: true, big_images: true, rychlik: false, uniform_expansion: false, finite_images: true }
    }

    fn neutral_point(&self) -> Option<NeutralPoint> {
        Some(NeutralPoint { location: 0.0, gamma: 1.0, kappa: 1.0, zone_edge: Self::ZONE_EDGE })
    }

    /// In the coordinate `s = 1/x` the left branch is `s -> s - 1`.
    fn fast_forward(&self, x: f64, max_steps: u64) -> Option<(u64, f64)> {
        if !(x > 0.0 && x < Self::ZONE_EDGE) {
            return None;
        }
        let room = (1.0 / x - 1.0 / Self::ZONE_EDGE).floor();
        let k = if room >= max_steps as f64 { max_steps } else { room as u64 };
        if k < 2 {
            return None;
        }
        Some((k, x / (1.0 - k as f64 * x)))
    }

    #[inline]
    fn apply(&self, x: f64) -> Result<(f64, usize)> {
        if !(x > 0.0 && x < 1.0) || (x - 0.5).abs() < super::BOUNDARY_TOL || x < super::BOUNDARY_TOL || 1.0 - x < super::BOUNDARY_TOL {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::OutsideDomain { x, lo: 0.0, hi: 1.0 });
            }
            return Err(Error::PointOnPartitionBoundary { x });
        }
        Ok(if x < 0.5 { (x / (1.0 - x), 0) } else { (2.0 * x - 1.0, 1) })
    }
}

/// First-return map of the Boole-like map to `(1/2, 1)`.
///
/// Branch `i` has return time `k = i + 1` and domain
/// `((1 + 1/(k+1))/2, (1 + 1/k)/2)`; each branch maps onto `(1/2, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BooleInducedMap;

impl BooleInducedMap {
    /// Return time on branch `i`.
    pub fn height(i: usize) -> u64 {
        i as u64 + 1
    }

    fn return_time_of(x: f64) -> u64 {
        let y = 2.0 * x - 1.0;
        let mut k = (1.0 / y).floor().max(1.0) as u64;
        // Repair rounding in the reciprocal.
        if y >= 1.0 / k as f64 && k > 1 {
            k -= 1;
        } else if y <= 1.0 / (k + 1) as f64 {
            k += 1;
        }
        k
    }
}

impl PiecewiseMap for BooleInducedMap {
    fn name(&self) -> String {
        "boole_induced".into()
    }

    fn domain(&self) -> Interval {
        UPPER_HALF
    }

    fn branch_count(&self) -> Option<usize> {
        None
    }

    fn branch_domain(&self, i: usize) -> Option<Interval> {
        let k = (i + 1) as f64;
        let lo = 0.5 * (1.0 + 1.0 / (k + 1.0));
        let hi = 0.5 * (1.0 + 1.0 / k);
        (hi - lo >= 1e-15).then_some(Interval { lo, hi })
    }

    fn branch_image(&self, _i: usize) -> Interval {
        UPPER_HALF
    }

    fn locate(&self, x: f64) -> Result<usize> {
        if !(x > 0.5 && x <= 1.0) {
            return Err(Error::OutsideDomain { x, lo: 0.5, hi: 1.0 });
        }
        Ok((Self::return_time_of(x) - 1) as usize)
    }

    fn forward(&self, i: usize, x: f64) -> f64 {
        let y = 2.0 * x - 1.0;
        y / (1.0 - i as f64 * y)
    }

    fn derivative(&self, i: usize, x: f64) -> f64 {
        let y = 2.0 * x - 1.0;
        let d = 1.0 - i as f64 * y;
        2.0 / (d * d)
    }

    fn inverse(&self, i: usize, s: f64) -> Option<f64> {
        let y = s / (1.0 + i as f64 * s);
        Some(0.5 * (1.0 + y))
    }

    fn interpolates_branches(&self) -> bool {
        true
    }

    fn inverse_family(&self, t: f64, s: f64) -> Option<(f64, f64)> {
        if !(s > 0.5 && s < 1.0) {
            return None;
        }
        let d = 1.0 + t * s;
        Some((0.5 * (1.0 + s / d), 0.5 / (d * d)))
    }

    fn exact_preimages(&self) -> bool {
        true
    }

    fn ref_density(&self, x: f64) -> f64 {
        1.0 / (x * LN_2)
    }

    fn conditions(&self) -> Conditions {
        Conditions { adler: true, big_images: true, rychlik: true, uniform_expansion: true, finite_images: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::IntervalMapSystem;

    #[test]
    fn fast_forward_matches_iteration() {
        let m = BooleMap;
        let x0 = 1e-3;
        let (k, xk) = m.fast_forward(x0, u64::MAX).unwrap();
        let mut x = x0;
        for _ in 0..k {
            x = m.forward(0, x);
            assert!(x <= BooleMap::ZONE_EDGE + 1e-12);
        }
        assert!((x - xk).abs() < 1e-9 * xk, "{x} vs {xk}");
        assert!(m.fast_forward(0.3, 10).is_none());
        assert_eq!(m.fast_forward(1e-6, 7).unwrap().0, 7);
    }

    #[test]
    fn induced_agrees_with_iteration() {
        let base = IntervalMapSystem::boole_like();
        let induced = BooleInducedMap;
        for j in 1..500 {
            let x = 0.5 + 0.5 * (j as f64 + 0.37) / 500.0;
            let i = induced.locate(x).unwrap();
            let mut z = base.evaluate(x).unwrap().0;
            let mut k = 1;
            while z <= 0.5 {
                z = base.evaluate(z).unwrap().0;
                k += 1;
            }
            assert_eq!(BooleInducedMap::height(i), k, "x = {x}");
            let s = induced.forward(i, x);
            assert!((s - z).abs() < 1e-9, "x = {x}: {s} vs {z}");
        }
    }

    #[test]
    fn induced_density_is_invariant() {
        // Transfer operator of the induced map applied to its density.
        let m = BooleInducedMap;
        for &s in &[0.55, 0.7, 0.95] {
            let mut total = 0.0;
            for i in 0..2_000_000 {
                let x = m.inverse(i, s).unwrap();
                total += m.ref_density(x) / m.derivative(i, x);
            }
            assert!((total - m.ref_density(s)).abs() < 1e-5, "{total}");
        }
    }
}
