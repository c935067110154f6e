//! Piecewise monotone interval maps and the constructions built on them.

mod boole;
mod finite;
mod induced;
mod orbit;
mod thaler;
mod tower;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric;

pub use boole::{BooleInducedMap, BooleMap};
pub use finite::{Branch, FiniteMap, RealFn};
pub use induced::{InducedCylinder, InducedSystem};
pub use orbit::{occupation_path, orbit_stats, visit_times, Observable, OrbitStats};
pub use thaler::{PartitionRule, ThalerMap};
pub use tower::{BranchHeight, TowerBase, TowerState, TowerSystem};

/// Distance to a partition point below which a point counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-14;
/// Relative size of the nudge applied to orbit points that land on a boundary.
pub const BOUNDARY_NUDGE: f64 = 1e-12;
pub const DEFAULT_RETURN_CAP: u64 = 100_000_000;

/// An open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("empty or non-finite interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership in the open interval.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Structural conditions a family is declared to satisfy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Conditions {
    /// Adler's distortion condition (A).
    pub adler: bool,
    /// Big images (B).
    pub big_images: bool,
    /// Rychlik's condition (R).
    pub rychlik: bool,
    /// Uniform expansion (U).
    pub uniform_expansion: bool,
    /// Finitely many distinct images (F).
    pub finite_images: bool,
}

/// Description of an indifferent fixed point at the left end of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutralPoint {
    /// Location of the fixed point (left domain endpoint).
    pub location: f64,
    /// Tail index: `T(x) = x + kappa (x - location)^{1 + 1/gamma} + ...`.
    pub gamma: f64,
    pub kappa: f64,
    /// Points below this value belong to the zone skipped by `fast_forward`.
    pub zone_edge: f64,
}

/// A piecewise increasing map of an interval with a finite or countable
/// partition into branch domains.
pub trait PiecewiseMap: Send + Sync {
    fn name(&self) -> String;

    fn domain(&self) -> Interval;

    /// `None` for countably many branches.
    fn branch_count(&self) -> Option<usize>;

    /// Domain of branch `i`, or `None` if there is no such branch (or it lies
    /// below machine resolution).
    fn branch_domain(&self, i: usize) -> Option<Interval>;

    fn branch_image(&self, i: usize) -> Interval;

    /// Index of the branch containing `x`; `x` must lie in the domain.
    fn locate(&self, x: f64) -> Result<usize>;

    fn forward(&self, i: usize, x: f64) -> f64;

    fn derivative(&self, i: usize, x: f64) -> f64;

    /// Closed-form inverse of branch `i`, if any.
    fn inverse(&self, _i: usize, _y: f64) -> Option<f64> {
        None
    }

    /// True when every branch is linear fractional, so preimages of
    /// intervals are intervals computable exactly through `inverse`.
    fn exact_preimages(&self) -> bool {
        false
    }

    /// True when `inverse_family` is available.
    fn interpolates_branches(&self) -> bool {
        false
    }

    /// Inverse branches continued to a real branch index `t`: the preimage
    /// of `y` and its derivative in `y`, or `None` when `y` is outside the
    /// image at `t`. Used to sum branch tails by quadrature in `t`.
    fn inverse_family(&self, _t: f64, _y: f64) -> Option<(f64, f64)> {
        None
    }

    /// Density of the reference (invariant) measure w.r.t. Lebesgue.
    fn ref_density(&self, _x: f64) -> f64 {
        1.0
    }

    fn density_integrable(&self) -> bool {
        true
    }

    fn conditions(&self) -> Conditions {
        Conditions::default()
    }

    fn neutral_point(&self) -> Option<NeutralPoint> {
        None
    }

    /// Jump over at most `max_steps` iterates while the orbit stays inside the
    /// neutral zone `(location, zone_edge)`. Returns the number of steps taken
    /// and the resulting point, or `None` when `x` is not in the zone or no
    /// jump is worthwhile.
    fn fast_forward(&self, _x: f64, _max_steps: u64) -> Option<(u64, f64)> {
        None
    }

    /// One application of the map with a boundary check.
    fn apply(&self, x: f64) -> Result<(f64, usize)> {
        let i = self.locate(x)?;
        let d = self
            .branch_domain(i)
            .ok_or(Error::PointOnPartitionBoundary { x })?;
        if x - d.lo < BOUNDARY_TOL || d.hi - x < BOUNDARY_TOL {
            return Err(Error::PointOnPartitionBoundary { x });
        }
        Ok((self.forward(i, x), i))
    }
}

/// Event counters accumulated while iterating orbits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub boundary_hits: u64,
    pub return_cap_hits: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.boundary_hits += other.boundary_hits;
        self.return_cap_hits += other.return_cap_hits;
    }
}

/// Shareable handle to a piecewise monotone map with its reference measure.
#[derive(Clone)]
pub struct IntervalMapSystem {
    map: Arc<dyn PiecewiseMap>,
}

impl fmt::Debug for IntervalMapSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalMapSystem").field("name", &self.map.name()).finish()
    }
}

impl IntervalMapSystem {
    pub fn new<M: PiecewiseMap + 'static>(map: M) -> Self {
        Self { map: Arc::new(map) }
    }

    pub fn from_arc(map: Arc<dyn PiecewiseMap>) -> Self {
        Self { map }
    }

    /// `x/(1-x)` on `(0, 1/2)` and `2x-1` on `(1/2, 1)`, invariant density `1/x`.
    pub fn boole_like() -> Self {
        Self::new(BooleMap)
    }

    /// First-return map of the Boole-like map on `(1/2, 1)`.
    pub fn boole_induced() -> Self {
        Self::new(BooleInducedMap)
    }

    pub fn thaler(gamma: f64, rule: PartitionRule) -> Result<Self> {
        Ok(Self::new(ThalerMap::new(gamma, rule)?))
    }

    /// `2x mod 1` on `(0, 1)`.
    pub fn doubling() -> Self {
        Self::new(FiniteMap::doubling())
    }

    pub fn identity() -> Self {
        Self::new(FiniteMap::identity())
    }

    pub fn map(&self) -> &dyn PiecewiseMap {
        self.map.as_ref()
    }

    pub fn name(&self) -> String {
        self.map.name()
    }

    pub fn domain(&self) -> Interval {
        self.map.domain()
    }

    pub fn ref_density(&self, x: f64) -> f64 {
        self.map.ref_density(x)
    }

    pub fn neutral_point(&self) -> Option<NeutralPoint> {
        self.map.neutral_point()
    }

    /// Image of `x` and the index of its branch.
    pub fn evaluate(&self, x: f64) -> Result<(f64, usize)> {
        let d = self.map.domain();
        if !(x >= d.lo && x <= d.hi) {
            return Err(Error::OutsideDomain { x, lo: d.lo, hi: d.hi });
        }
        self.map.apply(x)
    }

    /// Solve `forward_i(x) = y` on branch `i`.
    pub fn invert_branch(&self, i: usize, y: f64, tol: f64) -> Result<f64> {
        let image = self.map.branch_image(i);
        if !(y > image.lo && y < image.hi) {
            return Err(Error::OutsideImage { y, branch: i });
        }
        if let Some(x) = self.map.inverse(i, y) {
            return Ok(x);
        }
        let dom = self
            .map
            .branch_domain(i)
            .ok_or_else(|| Error::InvalidArgument(format!("branch {i} does not exist")))?;
        let map = &self.map;
        let x = numeric::solve_increasing(
            |x| map.forward(i, x),
            |x| map.derivative(i, x),
            y,
            dom.lo,
            dom.hi,
            tol,
        )?;
        if (map.forward(i, x) - y).abs() > tol + self.resolution(i, x) {
            return Err(Error::NoConvergence(format!("inverse of branch {i} at y = {y}")));
        }
        Ok(x)
    }

    /// One orbit step under the boundary policy: points on a partition
    /// boundary are nudged inward and the event is counted.
    pub fn step(&self, x: f64, counters: &mut Counters) -> Result<f64> {
        match self.map.apply(x) {
            Ok((y, _)) => Ok(y),
            Err(Error::PointOnPartitionBoundary { .. }) => {
                counters.boundary_hits += 1;
                let d = self.map.domain();
                let nudge = BOUNDARY_NUDGE * d.len();
                let mut z = x + nudge;
                if z >= d.hi {
                    z = x - nudge;
                }
                match self.map.apply(z) {
                    Ok((y, _)) => Ok(y),
                    Err(Error::PointOnPartitionBoundary { .. }) => {
                        // Extremely narrow branches: accept whatever the branch formula yields.
                        let i = self.map.locate(z)?;
                        Ok(self.map.forward(i, z))
                    }
                    Err(e) => Err(e),
                }
            }
            Err(e) => Err(e),
        }
    }

    /// Advance `x` by up to `max_steps` iterates inside the neutral zone.
    #[inline]
    pub fn fast_forward(&self, x: f64, max_steps: u64) -> Option<(u64, f64)> {
        self.map.fast_forward(x, max_steps)
    }

    /// True if fast-forwarding is available and never skips a visit to `set`.
    pub fn can_accelerate(&self, set: &Interval) -> bool {
        match self.map.neutral_point() {
            Some(np) => set.lo >= np.zone_edge,
            None => false,
        }
    }

    /// Iterate the inverse of the leftmost branch from its right endpoint:
    /// `tau_1 = xi`, `tau_{n+1} = w(tau_n)`. Returns `q_n = tau_n - location`
    /// for `n = 1..=n_max`.
    pub fn neutral_preimages(&self, n_max: usize) -> Result<Vec<f64>> {
        let np = self
            .map
            .neutral_point()
            .ok_or_else(|| Error::InvalidArgument("map has no indifferent fixed point".into()))?;
        let first = self.map.branch_domain(0).ok_or(Error::EmptyCylinder)?;
        let mut out = Vec::with_capacity(n_max);
        let mut tau = first.hi;
        for n in 1..=n_max {
            let q = tau - np.location;
            if q < 1e-14 {
                return Err(Error::PrecisionFloor { n: n as u64 });
            }
            out.push(q);
            tau = match self.map.inverse(0, tau) {
                Some(x) => x,
                None => {
                    let map = &self.map;
                    numeric::solve_increasing(
                        |x| map.forward(0, x),
                        |x| map.derivative(0, x),
                        tau,
                        np.location,
                        tau,
                        1e-15 * tau,
                    )?
                }
            };
        }
        Ok(out)
    }

    /// Smallest change of `forward_i` that is resolvable near `x` in 64-bit
    /// floats.
    pub fn resolution(&self, i: usize, x: f64) -> f64 {
        let ulp = f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
        4.0 * self.map.derivative(i, x) * ulp + f64::EPSILON * self.map.forward(i, x).abs()
    }

    /// Check the branch invariants on a grid of `n` points per branch for the
    /// first `max_branches` branches: monotonicity, image endpoints, and
    /// inverse consistency.
    pub fn validate(&self, n: usize, max_branches: usize) -> Result<()> {
        let count = self.map.branch_count().unwrap_or(max_branches).min(max_branches);
        for i in 0..count {
            let Some(d) = self.map.branch_domain(i) else { break };
            let image = self.map.branch_image(i);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..n {
                let x = d.lo + d.len() * k as f64 / n as f64;
                let y = self.map.forward(i, x);
                if !(y > prev) {
                    return Err(Error::InvalidArgument(format!("branch {i} not increasing near {x}")));
                }
                prev = y;
                if let Some(xi) = self.map.inverse(i, y) {
                    if (self.map.forward(i, xi) - y).abs() > 1e-12 * y.abs() + self.resolution(i, xi) {
                        return Err(Error::InvalidArgument(format!("inverse of branch {i} inconsistent at {y}")));
                    }
                }
            }
            let eps = 1e-9 * d.len();
            let lo = self.map.forward(i, d.lo + eps);
            let hi = self.map.forward(i, d.hi - eps);
            let tol = 1e-6 * image.len().max(1.0);
            if (lo - image.lo).abs() > tol + 1e-6 * (hi - lo).abs() || (hi - image.hi).abs() > tol + 1e-6 * (hi - lo).abs() {
                return Err(Error::InvalidArgument(format!("branch {i} image mismatch")));
            }
        }
        Ok(())
    }
}
