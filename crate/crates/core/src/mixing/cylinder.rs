use crate::error::{Error, Result};
use crate::maps::{Interval, IntervalMapSystem, RealFn};
use crate::numeric::integrate;
use crate::rng::{open01, Stream};
use crate::transfer::UlamDensity;

const MASS_TOL: f64 = 1e-13;

/// Invariant probability of a fibred system.
#[derive(Clone)]
pub enum StationaryLaw {
    /// Lebesgue measure on the domain.
    Lebesgue,
    /// Closed-form density with its distribution and quantile functions.
    Closed { density: RealFn, cdf: RealFn, quantile: RealFn },
    /// Piecewise constant density on cells, normalized to total mass 1.
    Piecewise(UlamDensity),
}

impl std::fmt::Debug for StationaryLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StationaryLaw::Lebesgue => write!(f, "Lebesgue"),
            StationaryLaw::Closed { .. } => write!(f, "Closed"),
            StationaryLaw::Piecewise(d) => write!(f, "Piecewise({} cells)", d.values.len()),
        }
    }
}

/// A probability preserving map with its generating partition (the branch
/// domains) and invariant law.
#[derive(Debug, Clone)]
pub struct FibredSystem {
    system: IntervalMapSystem,
    law: StationaryLaw,
    cumulative: Vec<f64>,
}

impl FibredSystem {
    pub fn new(system: IntervalMapSystem, law: StationaryLaw) -> Result<Self> {
        let cumulative = match &law {
            StationaryLaw::Piecewise(d) => {
                let mut acc = vec![0.0];
                for (k, v) in d.values.iter().enumerate() {
                    acc.push(acc[k] + v * (d.edges[k + 1] - d.edges[k]));
                }
                let total = *acc.last().unwrap_or(&0.0);
                if !((total - 1.0).abs() < 1e-9) {
                    return Err(Error::InvalidArgument(format!("piecewise density has mass {total}, expected 1")));
                }
                acc
            }
            _ => Vec::new(),
        };
        Ok(FibredSystem { system, law, cumulative })
    }

    /// Doubling map with Lebesgue measure.
    pub fn doubling() -> Self {
        FibredSystem { system: IntervalMapSystem::doubling(), law: StationaryLaw::Lebesgue, cumulative: Vec::new() }
    }

    /// First-return map of the Boole-like map to `(1/2, 1)` with its
    /// normalized invariant density `1/(x ln 2)`.
    pub fn boole_induced() -> Self {
        use std::f64::consts::LN_2;
        use std::sync::Arc;
        let law = StationaryLaw::Closed {
            density: Arc::new(|x| 1.0 / (x * LN_2)),
            cdf: Arc::new(|x: f64| (2.0 * x).log2()),
            quantile: Arc::new(|u: f64| 0.5 * u.exp2()),
        };
        FibredSystem { system: IntervalMapSystem::boole_induced(), law, cumulative: Vec::new() }
    }

    pub fn system(&self) -> &IntervalMapSystem {
        &self.system
    }

    pub fn law(&self) -> &StationaryLaw {
        &self.law
    }

    pub fn domain(&self) -> Interval {
        self.system.domain()
    }

    /// Density of the invariant probability.
    pub fn density(&self, x: f64) -> f64 {
        match &self.law {
            StationaryLaw::Lebesgue => 1.0 / self.domain().len(),
            StationaryLaw::Closed { density, .. } => density(x),
            StationaryLaw::Piecewise(d) => d.at(x).unwrap_or(0.0),
        }
    }

    /// `int_I weight dP` by quadrature. Calling it with `weight = 1` gives the
    /// same bits as any other weight that evaluates to 1.
    pub fn weighted_mass(&self, interval: Interval, weight: &dyn Fn(f64) -> f64) -> f64 {
        let Some(i) = interval.intersect(&self.domain()) else { return 0.0 };
        match &self.law {
            StationaryLaw::Piecewise(d) => {
                let mut total = 0.0;
                for k in 0..d.values.len() {
                    let cell = Interval { lo: d.edges[k], hi: d.edges[k + 1] };
                    if let Some(c) = cell.intersect(&i) {
                        let h = d.values[k];
                        total += integrate(|x| weight(x) * h, c.lo, c.hi, MASS_TOL).0;
                    }
                }
                total
            }
            _ => integrate(|x| weight(x) * self.density(x), i.lo, i.hi, MASS_TOL).0,
        }
    }

    /// `P(I)` in closed form.
    pub fn prob(&self, interval: Interval) -> f64 {
        let Some(i) = interval.intersect(&self.domain()) else { return 0.0 };
        match &self.law {
            StationaryLaw::Lebesgue => i.len() / self.domain().len(),
            StationaryLaw::Closed { cdf, .. } => (cdf(i.hi) - cdf(i.lo)).max(0.0),
            StationaryLaw::Piecewise(d) => {
                let at = |x: f64| {
                    let k = (d.edges.partition_point(|&e| e <= x).max(1) - 1).min(d.values.len() - 1);
                    self.cumulative[k] + d.values[k] * (x - d.edges[k]).max(0.0)
                };
                (at(i.hi) - at(i.lo)).max(0.0)
            }
        }
    }

    /// A draw from the invariant probability.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        let u = open01(rng);
        match &self.law {
            StationaryLaw::Lebesgue => {
                let d = self.domain();
                d.lo + u * d.len()
            }
            StationaryLaw::Closed { quantile, .. } => quantile(u),
            StationaryLaw::Piecewise(d) => {
                let c = &self.cumulative;
                let k = (c.partition_point(|&m| m < u).max(1) - 1).min(d.values.len() - 1);
                let frac = ((u - c[k]) / (c[k + 1] - c[k])).clamp(0.0, 1.0);
                d.edges[k] + frac * (d.edges[k + 1] - d.edges[k])
            }
        }
    }
}

/// A cylinder `a_0 ∩ S^{-1} a_1 ∩ ... ∩ S^{-(k-1)} a_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub word: Vec<usize>,
    pub interval: Interval,
    pub prob: f64,
}

/// Preimage of `target` under branch `a`, as an interval.
fn pull_back(system: &IntervalMapSystem, a: usize, target: Interval) -> Result<Option<Interval>> {
    let map = system.map();
    let Some(dom) = map.branch_domain(a) else { return Ok(None) };
    let image = map.branch_image(a);
    let Some(t) = target.intersect(&image) else { return Ok(None) };
    let lo = if t.lo <= image.lo { dom.lo } else { system.invert_branch(a, t.lo, 1e-15)? };
    let hi = if t.hi >= image.hi { dom.hi } else { system.invert_branch(a, t.hi, 1e-15)? };
    Ok((hi > lo).then_some(Interval { lo, hi }))
}

/// Interval realization of a word, or `None` if it is empty.
pub fn cylinder_interval(system: &IntervalMapSystem, word: &[usize]) -> Result<Option<Interval>> {
    let Some((&last, head)) = word.split_last() else {
        return Err(Error::InvalidArgument("empty word".into()));
    };
    let mut cur = match system.map().branch_domain(last) {
        Some(d) => d,
        None => return Ok(None),
    };
    for &a in head.iter().rev() {
        match pull_back(system, a, cur)? {
            Some(i) => cur = i,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

/// `P(A)` for the cylinder of `word`.
pub fn cylinder_prob(fs: &FibredSystem, word: &[usize]) -> Result<f64> {
    match cylinder_interval(fs.system(), word)? {
        Some(i) => Ok(fs.prob(i)),
        None => Err(Error::EmptyCylinder),
    }
}

/// Words of length `1..=max_len` with probability at least `min_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFamily {
    pub max_len: usize,
    pub min_prob: f64,
    pub words: Vec<Cylinder>,
    /// Per length, the probability of the parents not covered by the hull
    /// of their enumerated children.
    pub uncovered: Vec<f64>,
}

impl CylinderFamily {
    /// Enumerate by depth-first extension. Countable partitions are taken
    /// in index order, which is order of decreasing branch length, and the
    /// extension at each level stops at the first child below `min_prob`.
    pub fn enumerate(fs: &FibredSystem, max_len: usize, min_prob: f64) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be at least 1".into()));
        }
        let mut words = Vec::new();
        let mut uncovered = vec![0.0; max_len];
        let mut stack: Vec<(Vec<usize>, Interval)> = vec![(Vec::new(), fs.domain())];
        let countable = fs.system().map().branch_count().is_none();
        let n_branches = fs.system().map().branch_count().unwrap_or(usize::MAX);
        while let Some((prefix, parent)) = stack.pop() {
            let mut children = Vec::new();
            for a in 0..n_branches {
                if fs.system().map().branch_domain(a).is_none() {
                    break;
                }
                let mut w = prefix.clone();
                w.push(a);
                let Some(interval) = cylinder_interval(fs.system(), &w)? else { continue };
                let prob = fs.prob(interval);
                if prob < min_prob {
                    if countable {
                        break;
                    }
                    continue;
                }
                children.push(Cylinder { word: w, interval, prob });
            }
            let lo = children.iter().map(|c| c.interval.lo).fold(parent.hi, f64::min);
            let hi = children.iter().map(|c| c.interval.hi).fold(parent.lo, f64::max);
            uncovered[prefix.len()] += if lo < hi {
                fs.prob(Interval { lo: parent.lo, hi: lo }) + fs.prob(Interval { lo: hi, hi: parent.hi })
            } else {
                fs.prob(parent)
            };
            for c in children.into_iter().rev() {
                if c.word.len() < max_len {
                    stack.push((c.word.clone(), c.interval));
                }
                words.push(c);
            }
        }
        words.sort_by(|a, b| a.word.len().cmp(&b.word.len()).then_with(|| a.word.cmp(&b.word)));
        Ok(CylinderFamily { max_len, min_prob, words, uncovered })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn of_length(&self, k: usize) -> impl Iterator<Item = &Cylinder> {
        self.words.iter().filter(move |c| c.word.len() == k)
    }

    pub fn descriptor(&self) -> String {
        format!("cylinders(len<={}, p>={:e}, count={})", self.max_len, self.min_prob, self.words.len())
    }
}

/// `count` equal cells of the domain, the default test sets.
pub fn test_intervals(domain: Interval, count: usize) -> Vec<Interval> {
    let w = domain.len() / count as f64;
    (0..count)
        .map(|k| Interval { lo: domain.lo + k as f64 * w, hi: if k + 1 == count { domain.hi } else { domain.lo + (k + 1) as f64 * w } })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_cylinders() {
        let fs = FibredSystem::doubling();
        for k in 1..=6 {
            let w = vec![1usize; k];
            assert!((cylinder_prob(&fs, &w).unwrap() - 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
        let i = cylinder_interval(fs.system(), &[0, 1]).unwrap().unwrap();
        assert!((i.lo - 0.25).abs() < 1e-15 && (i.hi - 0.5).abs() < 1e-15);
        assert!((cylinder_prob(&fs, &[0]).unwrap() - 0.5).abs() < 1e-13);
        let fam = CylinderFamily::enumerate(&fs, 3, 0.0).unwrap();
        assert_eq!(fam.len(), 14);
    }

    #[test]
    fn empty_word_is_rejected() {
        let fs = FibredSystem::doubling();
        assert!(cylinder_prob(&fs, &[]).is_err());
        assert!(matches!(cylinder_prob(&fs, &[0, 5]), Err(Error::EmptyCylinder)));
    }

    #[test]
    fn boole_induced_words_are_complete() {
        let fs = FibredSystem::boole_induced();
        let fam = CylinderFamily::enumerate(&fs, 3, 1e-9).unwrap();
        let mut lumped = 0.0;
        for k in 1..=3 {
            // Mass pruned at shorter lengths is carried down.
            lumped += fam.uncovered[k - 1];
            let total: f64 = fam.of_length(k).map(|c| c.prob).sum::<f64>() + lumped;
            assert!((total - 1.0).abs() < 1e-3, "k = {k}: {total}");
        }
        let first: f64 = fam.of_length(1).map(|c| c.prob).sum();
        assert!(first > 1.0 - 1e-3);
    }

    #[test]
    fn sampling_matches_law() {
        use crate::rng::{stream, tag};
        let fs = FibredSystem::boole_induced();
        let mut rng = stream(1, tag::MIXING, 0);
        let n = 20_000;
        let below = (0..n).filter(|_| fs.sample(&mut rng) < 0.75).count() as f64 / n as f64;
        let p = fs.prob(Interval { lo: 0.5, hi: 0.75 });
        assert!((p - (1.5f64).log2()).abs() < 1e-12);
        assert!((below - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
}
