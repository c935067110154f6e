use super::{Counters, Interval, IntervalMapSystem};
use crate::error::{Error, Result};

/// First-return system of a base map on an inducing interval.
#[derive(Debug, Clone)]
pub struct InducedSystem {
    base: IntervalMapSystem,
    omega: Interval,
    return_cap: u64,
    accelerate: bool,
}

/// `B(k) = B ∩ [return time = k]` for a base branch `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedCylinder {
    pub branch: usize,
    pub return_time: u64,
    pub interval: Interval,
}

impl InducedSystem {
    pub fn new(base: IntervalMapSystem, omega: Interval, return_cap: u64) -> Result<Self> {
        let d = base.domain();
        if omega.lo < d.lo || omega.hi > d.hi || !(omega.len() > 0.0) {
            return Err(Error::InvalidArgument(format!("inducing set {omega} not inside {d}")));
        }
        if return_cap == 0 {
            return Err(Error::InvalidArgument("return cap must be positive".into()));
        }
        let accelerate = base.can_accelerate(&omega);
        Ok(Self { base, omega, return_cap, accelerate })
    }

    /// Enable or disable neutral-zone fast-forwarding (it is used by default
    /// whenever it cannot skip a visit to the inducing set).
    pub fn with_acceleration(mut self, on: bool) -> Self {
        self.accelerate = on && self.base.can_accelerate(&self.omega);
        self
    }

    pub fn base(&self) -> &IntervalMapSystem {
        &self.base
    }

    pub fn omega(&self) -> Interval {
        self.omega
    }

    pub fn return_cap(&self) -> u64 {
        self.return_cap
    }

    pub fn accelerated(&self) -> bool {
        self.accelerate
    }

    /// Return time `min{n >= 1 : T^n x in omega}` and the return point.
    pub fn next_return(&self, mut x: f64, counters: &mut Counters) -> Result<(u64, f64)> {
        let mut t = 0u64;
        loop {
            if self.accelerate {
                if let Some((k, z)) = self.base.fast_forward(x, self.return_cap - t) {
                    t += k;
                    x = z;
                    if t >= self.return_cap {
                        counters.return_cap_hits += 1;
                        return Err(Error::ReturnCapExceeded { cap: self.return_cap });
                    }
                    continue;
                }
            }
            x = self.base.step(x, counters)?;
            t += 1;
            if self.omega.contains(x) {
                return Ok((t, x));
            }
            if t >= self.return_cap {
                counters.return_cap_hits += 1;
                return Err(Error::ReturnCapExceeded { cap: self.return_cap });
            }
        }
    }

    pub fn return_time(&self, x: f64) -> Result<u64> {
        Ok(self.next_return(x, &mut Counters::default())?.0)
    }

    pub fn induced_value(&self, x: f64) -> Result<f64> {
        Ok(self.next_return(x, &mut Counters::default())?.1)
    }

    /// Successive return times `phi∘S^0, ..., phi∘S^{count-1}` from `x`.
    pub fn return_times(&self, mut x: f64, count: usize, counters: &mut Counters) -> Result<(Vec<u64>, f64)> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let (t, z) = self.next_return(x, counters)?;
            out.push(t);
            x = z;
        }
        Ok((out, x))
    }

    /// Enumerate induced cylinders for bases whose inducing set is the
    /// complement of a leftmost neutral branch: for a branch `B` other than
    /// the leftmost one, `B(1) = v_B((tau_1, .))` and
    /// `B(k) = v_B((tau_k, tau_{k-1}))` for `k >= 2`, where `tau_k` are the
    /// preimages of the leftmost branch's right endpoint.
    pub fn cylinders(&self, branches: usize, max_k: usize) -> Result<Vec<InducedCylinder>> {
        let map = self.base.map();
        let np = self
            .base
            .neutral_point()
            .ok_or_else(|| Error::InvalidArgument("cylinder enumeration needs a neutral leftmost branch".into()))?;
        let first = map.branch_domain(0).ok_or(Error::EmptyCylinder)?;
        let dom = self.base.domain();
        if (self.omega.lo - first.hi).abs() > 1e-12 || (self.omega.hi - dom.hi).abs() > 1e-12 || np.location != dom.lo {
            return Err(Error::InvalidArgument("inducing set is not the complement of the leftmost branch".into()));
        }
        let tau = self.base.neutral_preimages(max_k.max(1))?;
        let mut out = Vec::new();
        for b in 1..=branches {
            let Some(bd) = map.branch_domain(b) else { break };
            let image = map.branch_image(b);
            for k in 1..=max_k {
                let (lo, hi) = if k == 1 { (tau[0], image.hi) } else { (tau[k - 1], tau[k - 2]) };
                let lo = lo.max(image.lo);
                let hi = hi.min(image.hi);
                if lo >= hi {
                    continue;
                }
                let a = self.base.invert_branch(b, lo.max(image.lo + 1e-300), 1e-15).unwrap_or(bd.lo);
                let z = if hi >= image.hi { bd.hi } else { self.base.invert_branch(b, hi, 1e-15)? };
                if z > a {
                    out.push(InducedCylinder { branch: b, return_time: k as u64, interval: Interval { lo: a, hi: z } });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::PartitionRule;

    fn boole_induced() -> InducedSystem {
        InducedSystem::new(IntervalMapSystem::boole_like(), Interval { lo: 0.5, hi: 1.0 }, 1000).unwrap()
    }

    #[test]
    fn boole_return_examples() {
        let s = boole_induced();
        assert_eq!(s.return_time(0.8).unwrap(), 1);
        assert!((s.induced_value(0.8).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(s.return_time(0.61).unwrap(), 4);
    }

    #[test]
    fn mobius_exit_rule() {
        // k-fold left iterate is y/(1 - k y); it exceeds 1/2 iff y > 1/(k+2).
        let s = InducedSystem::new(IntervalMapSystem::boole_like(), Interval { lo: 0.5, hi: 1.0 }, 1 << 20)
            .unwrap()
            .with_acceleration(false);
        for j in 1..2000 {
            let x = 0.5 + 0.5 * (j as f64 + 0.3719) / 2000.0;
            let y = 2.0 * x - 1.0;
            let expected = if y > 0.5 { 1 } else { 1 + (1..).find(|&k| y > 1.0 / (k as f64 + 2.0)).unwrap() };
            assert_eq!(s.return_time(x).unwrap(), expected, "x = {x}");
        }
    }

    #[test]
    fn cap_is_reported() {
        let s = InducedSystem::new(IntervalMapSystem::boole_like(), Interval { lo: 0.5, hi: 1.0 }, 10).unwrap();
        let mut c = Counters::default();
        assert!(matches!(s.next_return(0.5001, &mut c), Err(Error::ReturnCapExceeded { cap: 10 })));
        assert_eq!(c.return_cap_hits, 1);
    }

    #[test]
    fn accelerated_returns_match_naive() {
        let base = IntervalMapSystem::boole_like();
        let fast = InducedSystem::new(base.clone(), Interval { lo: 0.5, hi: 1.0 }, 1 << 40).unwrap();
        let slow = fast.clone().with_acceleration(false);
        assert!(fast.accelerated() && !slow.accelerated());
        for j in 1..300 {
            let x = 0.5 + 0.5 * j as f64 / 300.0 * 0.01 + 1e-9;
            assert_eq!(fast.return_time(x).unwrap(), slow.return_time(x).unwrap(), "x = {x}");
        }
    }

    #[test]
    fn thaler_cylinders_partition_branches() {
        let base = IntervalMapSystem::thaler(0.5, PartitionRule::Midpoint).unwrap();
        let xi = base.map().branch_domain(0).unwrap().hi;
        let s = InducedSystem::new(base.clone(), Interval { lo: xi, hi: 1.0 }, 1 << 30).unwrap();
        let cyl = s.cylinders(3, 400).unwrap();
        for b in 1..=3 {
            let bd = base.map().branch_domain(b).unwrap();
            let total: f64 = cyl.iter().filter(|c| c.branch == b).map(|c| c.interval.len()).sum();
            assert!(total <= bd.len() * (1.0 + 1e-12));
            assert!(total > 0.95 * bd.len(), "branch {b}: {total} of {}", bd.len());
            for c in cyl.iter().filter(|c| c.branch == b && c.return_time <= 20) {
                let x = c.interval.midpoint();
                assert_eq!(s.return_time(x).unwrap(), c.return_time, "cylinder {c:?}");
            }
        }
    }
}
