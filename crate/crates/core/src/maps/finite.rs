use std::sync::Arc;

use super::{Conditions, Interval, PiecewiseMap};
use crate::error::{Error, Result};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One monotone branch `forward: domain -> image`.
#[derive(Clone)]
pub struct Branch {
    pub domain: Interval,
    pub image: Interval,
    pub forward: RealFn,
    pub derivative: RealFn,
    pub inverse: Option<RealFn>,
}

impl Branch {
    /// Affine branch mapping `domain` increasingly onto `image`.
    pub fn affine(domain: Interval, image: Interval) -> Self {
        let slope = image.len() / domain.len();
        let (d0, i0) = (domain.lo, image.lo);
        Self {
            domain,
            image,
            forward: Arc::new(move |x| i0 + slope * (x - d0)),
            derivative: Arc::new(move |_| slope),
            inverse: Some(Arc::new(move |y| d0 + (y - i0) / slope)),
        }
    }
}

/// A map with finitely many branches given explicitly.
#[derive(Clone)]
pub struct FiniteMap {
    name: String,
    domain: Interval,
    branches: Vec<Branch>,
    density: Option<RealFn>,
    integrable: bool,
    conditions: Conditions,
    linear_fractional: bool,
}

impl FiniteMap {
    /// Build from a branch list sorted left to right. Checks that the
    /// domains are disjoint and cover the domain up to `1e-10`.
    pub fn new(name: impl Into<String>, domain: Interval, branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidArgument("no branches".into()));
        }
        let mut covered = 0.0;
        for w in branches.windows(2) {
            if w[0].domain.hi > w[1].domain.lo {
                return Err(Error::InvalidArgument("branch domains overlap or are unsorted".into()));
            }
        }
        for b in &branches {
            if b.domain.lo < domain.lo || b.domain.hi > domain.hi {
                return Err(Error::InvalidArgument(format!("branch {} outside domain", b.domain)));
            }
            covered += b.domain.len();
        }
        if domain.len() - covered > 1e-10 {
            return Err(Error::InvalidArgument(format!("branches leave a gap of {}", domain.len() - covered)));
        }
        let linear_fractional = branches.iter().all(|b| b.inverse.is_some());
        Ok(Self {
            name: name.into(),
            domain,
            branches,
            density: None,
            integrable: true,
            conditions: Conditions::default(),
            linear_fractional,
        })
    }

    pub fn with_density(mut self, density: RealFn, integrable: bool) -> Self {
        self.density = Some(density);
        self.integrable = integrable;
        self
    }

    pub fn with_conditions(mut self, conditions: Conditions) -> Self {
        self.conditions = conditions;
        self
    }

    /// Declare whether exact interval preimages may be computed through the
    /// branch inverses (true for affine and Möbius branches).
    pub fn with_exact_preimages(mut self, exact: bool) -> Self {
        self.linear_fractional = exact && self.branches.iter().all(|b| b.inverse.is_some());
        self
    }

    pub fn doubling() -> Self {
        let unit = Interval { lo: 0.0, hi: 1.0 };
        let branches = vec![
            Branch::affine(Interval { lo: 0.0, hi: 0.5 }, unit),
            Branch::affine(Interval { lo: 0.5, hi: 1.0 }, unit),
        ];
        Self::new("doubling", unit, branches).expect("valid").with_conditions(Conditions {
            adler: true,
            big_images: true,
            rychlik: true,
            uniform_expansion: true,
            finite_images: true,
        })
    }

    pub fn identity() -> Self {
        let unit = Interval { lo: 0.0, hi: 1.0 };
        Self::new("identity", unit, vec![Branch::affine(unit, unit)]).expect("valid")
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
}

impl PiecewiseMap for FiniteMap {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn branch_count(&self) -> Option<usize> {
        Some(self.branches.len())
    }

    fn branch_domain(&self, i: usize) -> Option<Interval> {
        self.branches.get(i).map(|b| b.domain)
    }

    fn branch_image(&self, i: usize) -> Interval {
        self.branches[i].image
    }

    fn locate(&self, x: f64) -> Result<usize> {
        let i = self.branches.partition_point(|b| b.domain.hi <= x);
        if i < self.branches.len() && x >= self.branches[i].domain.lo {
            Ok(i)
        } else if i < self.branches.len() || x == self.domain.hi {
            // In a gap between branches or at the right endpoint.
            Err(Error::PointOnPartitionBoundary { x })
        } else {
            Err(Error::OutsideDomain { x, lo: self.domain.lo, hi: self.domain.hi })
        }
    }

    fn forward(&self, i: usize, x: f64) -> f64 {
        (self.branches[i].forward)(x)
    }

    fn derivative(&self, i: usize, x: f64) -> f64 {
        (self.branches[i].derivative)(x)
    }

    fn inverse(&self, i: usize, y: f64) -> Option<f64> {
        self.branches[i].inverse.as_ref().map(|f| f(y))
    }

    fn exact_preimages(&self) -> bool {
        self.linear_fractional
    }

    fn ref_density(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(1.0, |h| h(x))
    }

    fn density_integrable(&self) -> bool {
        self.integrable
    }

    fn conditions(&self) -> Conditions {
        self.conditions
    }
}
