use std::sync::Arc;

use super::{Counters, InducedSystem, IntervalMapSystem};
use crate::error::{Error, Result};

/// A probability preserving base `S` with an integer height `phi`.
pub trait TowerBase: Send + Sync {
    /// `(phi(x), S x)`.
    fn advance(&self, x: f64, counters: &mut Counters) -> Result<(u64, f64)>;
}

impl TowerBase for InducedSystem {
    fn advance(&self, x: f64, counters: &mut Counters) -> Result<(u64, f64)> {
        self.next_return(x, counters)
    }
}

/// A base map whose height is a function of the branch index.
pub struct BranchHeight<H: Fn(usize) -> u64 + Send + Sync> {
    pub system: IntervalMapSystem,
    pub height: H,
}

impl<H: Fn(usize) -> u64 + Send + Sync> TowerBase for BranchHeight<H> {
    fn advance(&self, x: f64, counters: &mut Counters) -> Result<(u64, f64)> {
        let i = self.system.map().locate(x)?;
        Ok(((self.height)(i), self.system.step(x, counters)?))
    }
}

/// Point `(x, level)` of a tower, with `phi(x)` and `S x` cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerState {
    pub x: f64,
    pub level: u64,
    pub height: u64,
    next: f64,
}

/// Kakutani tower over `(S, phi)`.
#[derive(Clone)]
pub struct TowerSystem {
    base: Arc<dyn TowerBase>,
}

impl TowerSystem {
    pub fn new<B: TowerBase + 'static>(base: B) -> Self {
        Self { base: Arc::new(base) }
    }

    /// Tower over the first-return system of `induced`.
    pub fn over_induced(induced: InducedSystem) -> Self {
        Self::new(induced)
    }

    /// The state `(x, 1)`.
    pub fn start(&self, x: f64, counters: &mut Counters) -> Result<TowerState> {
        let (height, next) = self.base.advance(x, counters)?;
        Ok(TowerState { x, level: 1, height, next })
    }

    /// `(x, n) -> (x, n+1)` below the top, `(x, phi(x)) -> (S x, 1)` at the top.
    pub fn step(&self, state: &mut TowerState, counters: &mut Counters) -> Result<()> {
        if state.level < state.height {
            state.level += 1;
        } else {
            *state = self.start(state.next, counters)?;
        }
        Ok(())
    }

    /// Times `t < n` at which the orbit of `(x, 1)` is on level 1. A height
    /// exceeding the base's return cap ends the orbit when the cap reaches
    /// past the horizon.
    pub fn base_visits(&self, x: f64, n: u64, counters: &mut Counters) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        if n == 0 {
            return Ok(out);
        }
        let mut state = match self.start(x, counters) {
            Ok(s) => s,
            Err(Error::ReturnCapExceeded { cap }) if cap >= n => return Ok(vec![0]),
            Err(e) => return Err(e),
        };
        for t in 0..n {
            if state.level == 1 {
                out.push(t);
            }
            if t + 1 < n {
                match self.step(&mut state, counters) {
                    Ok(()) => {}
                    Err(Error::ReturnCapExceeded { cap }) if t + 1 + cap >= n => {
                        out.push(t + 1);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{visit_times, BooleInducedMap, Interval};

    #[test]
    fn unit_height_is_the_base() {
        let tower = TowerSystem::new(BranchHeight { system: IntervalMapSystem::doubling(), height: |_| 1 });
        let mut c = Counters::default();
        let mut s = tower.start(0.3, &mut c).unwrap();
        for _ in 0..5 {
            tower.step(&mut s, &mut c).unwrap();
            assert_eq!(s.level, 1);
        }
        assert!((s.x - (0.3f64 * 32.0).fract()).abs() < 1e-12);
    }

    #[test]
    fn climbs_then_applies_base() {
        let tower = TowerSystem::new(BranchHeight { system: IntervalMapSystem::doubling(), height: |_| 3 });
        let mut c = Counters::default();
        let mut s = tower.start(0.3, &mut c).unwrap();
        let mut levels = vec![s.level];
        for _ in 0..3 {
            tower.step(&mut s, &mut c).unwrap();
            levels.push(s.level);
        }
        assert_eq!(levels, vec![1, 2, 3, 1]);
        assert!((s.x - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tower_reproduces_base_visit_times() {
        let base = IntervalMapSystem::boole_like();
        let omega = Interval { lo: 0.5, hi: 1.0 };
        let induced = InducedSystem::new(base.clone(), omega, 1000).unwrap().with_acceleration(false);
        let tower = TowerSystem::over_induced(induced);
        for &x in &[0.61, 0.77, 0.5123, 0.99] {
            let mut c = Counters::default();
            let from_tower = tower.base_visits(x, 100, &mut c).unwrap();
            let (direct, _) = visit_times(&base, x, omega, 100, false).unwrap();
            assert_eq!(from_tower, direct);
            let mut s = tower.start(x, &mut c).unwrap();
            for _ in 0..100 {
                assert!(1 <= s.level && s.level <= s.height);
                if tower.step(&mut s, &mut c).is_err() {
                    break;
                }
            }
        }
    }

    #[test]
    fn closed_form_induced_tower_heights() {
        let tower = TowerSystem::new(BranchHeight { system: IntervalMapSystem::boole_induced(), height: BooleInducedMap::height });
        let mut c = Counters::default();
        let s = tower.start(0.61, &mut c).unwrap();
        assert_eq!(s.height, 4);
    }
}
