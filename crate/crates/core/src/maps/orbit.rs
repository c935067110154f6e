use std::sync::Arc;

use super::{Counters, Interval, IntervalMapSystem};
use crate::error::Result;

/// Something accumulated along an orbit.
#[derive(Clone)]
pub enum Observable {
    Indicator(Interval),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Indicator(i) => write!(f, "Indicator{i}"),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

/// Birkhoff sums `sum_{k<n} f(T^k x0)` of a list of observables.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitStats {
    pub n: u64,
    /// Occupation counts, one per observable (zero for functions).
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
    /// Visit times to the first indicator, when requested.
    pub visits: Option<Vec<u64>>,
    pub final_point: f64,
    pub counters: Counters,
}

/// Stream `n` iterates from `x0`, accumulating every observable.
pub fn orbit_stats(
    system: &IntervalMapSystem,
    x0: f64,
    n: u64,
    observables: &[Observable],
    log_visits: bool,
) -> Result<OrbitStats> {
    let mut counts = vec![0u64; observables.len()];
    let mut sums = vec![0.0; observables.len()];
    let first_indicator = observables.iter().position(|o| matches!(o, Observable::Indicator(_)));
    let mut visits = (log_visits && first_indicator.is_some()).then(Vec::new);
    let mut counters = Counters::default();
    let mut x = x0;
    for t in 0..n {
        for (j, obs) in observables.iter().enumerate() {
            match obs {
                Observable::Indicator(set) => {
                    if set.contains(x) {
                        counts[j] += 1;
                        sums[j] += 1.0;
                        if Some(j) == first_indicator {
                            if let Some(v) = visits.as_mut() {
                                v.push(t);
                            }
                        }
                    }
                }
                Observable::Function(f) => sums[j] += f(x),
            }
        }
        if t + 1 < n {
            x = system.step(x, &mut counters)?;
        }
    }
    Ok(OrbitStats { n, counts, sums, visits, final_point: x, counters })
}

/// Occupation times `S_n(1_set)` at each `n` of an increasing grid.
///
/// With `accelerate`, stretches inside the neutral zone are skipped in one
/// jump; this never misses a visit because the set avoids the zone.
pub fn occupation_path(
    system: &IntervalMapSystem,
    x0: f64,
    set: Interval,
    grid: &[u64],
    accelerate: bool,
) -> Result<(Vec<u64>, Counters)> {
    let accelerate = accelerate && system.can_accelerate(&set);
    let mut counters = Counters::default();
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0;
    let mut t = 0u64;
    let mut count = 0u64;
    for &target in grid {
        while t < target {
            if accelerate {
                if let Some((k, z)) = system.fast_forward(x, target - t) {
                    x = z;
                    t += k;
                    continue;
                }
            }
            if set.contains(x) {
                count += 1;
            }
            t += 1;
            x = system.step(x, &mut counters)?;
        }
        out.push(count);
    }
    Ok((out, counters))
}

/// Visit times `t < n` with `T^t x0` in `set`.
pub fn visit_times(
    system: &IntervalMapSystem,
    x0: f64,
    set: Interval,
    n: u64,
    accelerate: bool,
) -> Result<(Vec<u64>, Counters)> {
    let accelerate = accelerate && system.can_accelerate(&set);
    let mut counters = Counters::default();
    let mut out = Vec::new();
    let mut x = x0;
    let mut t = 0u64;
    while t < n {
        if accelerate {
            if let Some((k, z)) = system.fast_forward(x, n - t) {
                x = z;
                t += k;
                continue;
            }
        }
        if set.contains(x) {
            out.push(t);
        }
        t += 1;
        if t < n {
            x = system.step(x, &mut counters)?;
        }
    }
    Ok((out, counters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_period_two() {
        let s = IntervalMapSystem::doubling();
        let a = Observable::Indicator(Interval { lo: 0.0, hi: 0.5 });
        let st = orbit_stats(&s, 1.0 / 3.0, 4, &[a], true).unwrap();
        assert_eq!(st.counts, vec![2]);
        assert_eq!(st.visits, Some(vec![0, 2]));
    }

    #[test]
    fn zero_length_orbit() {
        let s = IntervalMapSystem::boole_like();
        let a = Observable::Indicator(Interval { lo: 0.5, hi: 1.0 });
        let f = Observable::Function(Arc::new(|x| x));
        let st = orbit_stats(&s, 0.3, 0, &[a, f], false).unwrap();
        assert_eq!(st.counts, vec![0, 0]);
        assert_eq!(st.sums, vec![0.0, 0.0]);
    }

    #[test]
    fn boole_visits() {
        let s = IntervalMapSystem::boole_like();
        let omega = Interval { lo: 0.5, hi: 1.0 };
        let st = orbit_stats(&s, 0.61, 5, &[Observable::Indicator(omega)], true).unwrap();
        assert_eq!(st.counts, vec![2]);
        assert_eq!(st.visits, Some(vec![0, 4]));
        let (v, _) = visit_times(&s, 0.61, omega, 5, false).unwrap();
        assert_eq!(v, vec![0, 4]);
    }

    #[test]
    fn occupation_path_matches_visits() {
        let s = IntervalMapSystem::boole_like();
        let omega = Interval { lo: 0.5, hi: 1.0 };
        let grid = [1u64, 2, 4, 8, 16, 32, 64, 128, 256];
        for &x0 in &[0.61, 0.123, 0.987] {
            let (path, _) = occupation_path(&s, x0, omega, &grid, false).unwrap();
            let (v, _) = visit_times(&s, x0, omega, 256, false).unwrap();
            for (n, c) in grid.iter().zip(&path) {
                assert_eq!(*c as usize, v.iter().filter(|&&t| t < *n).count());
            }
        }
    }
}
