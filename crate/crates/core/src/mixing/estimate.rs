use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CylinderFamily, FibredSystem};
use crate::error::{Error, Result};
use crate::maps::{Counters, Interval};
use crate::rng::{stream, tag};

/// Samples drawn per parallel block.
pub const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    ThetaMu,
    PhiMinus,
    PsiStar,
    Psi,
}

impl CoefficientKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientKind::ThetaMu => "theta_mu",
            CoefficientKind::PhiMinus => "phi_minus",
            CoefficientKind::PsiStar => "psi_star",
            CoefficientKind::Psi => "psi",
        }
    }
}

impl std::str::FromStr for CoefficientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta_mu" => Ok(CoefficientKind::ThetaMu),
            "phi_minus" => Ok(CoefficientKind::PhiMinus),
            "psi_star" => Ok(CoefficientKind::PsiStar),
            "psi" => Ok(CoefficientKind::Psi),
            _ => Err(Error::InvalidArgument(format!("unknown coefficient `{s}`"))),
        }
    }
}

/// Monte Carlo budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

/// Hit counts of `A ∩ S^{-(n+k)} B` for every cell, sharing one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCounts {
    n_grid: Vec<u64>,
    prob_a: Vec<f64>,
    prob_b: Vec<f64>,
    /// `P(B)` by the same quadrature that computes `mu(B)`.
    mass_b: Vec<f64>,
    tests: Vec<Interval>,
    descriptor: String,
    samples: usize,
    /// `counts[(n_index * |A| + a) * |B| + b]`.
    counts: Vec<u64>,
    pub counters: Counters,
}

impl JointCounts {
    pub fn collect(
        fs: &FibredSystem,
        n_grid: &[u64],
        family_a: &CylinderFamily,
        family_b: &[Interval],
        mc: &MonteCarlo,
    ) -> Result<Self> {
        if family_a.is_empty() || family_b.is_empty() || n_grid.is_empty() {
            return Err(Error::InsufficientData("empty cylinder family, test family or grid".into()));
        }
        if mc.samples < 2 {
            return Err(Error::InsufficientData(format!("{} Monte Carlo samples", mc.samples)));
        }
        let index: HashMap<&[usize], usize> =
            family_a.words.iter().enumerate().map(|(i, c)| (c.word.as_slice(), i)).collect();
        let max_k = family_a.max_len;
        let horizon = (*n_grid.iter().max().unwrap_or(&0) as usize) + max_k;
        let (na, nb) = (family_a.len(), family_b.len());
        let cells = n_grid.len() * na * nb;
        let blocks = mc.samples.div_ceil(BLOCK);
        let parts: Vec<(Vec<u64>, Counters)> = (0..blocks)
            .into_par_iter()
            .map(|blk| {
                let mut rng = stream(mc.seed, tag::MIXING, blk as u64);
                let mut counts = vec![0u64; cells];
                let mut counters = Counters::default();
                let mut orbit = Vec::with_capacity(horizon + 1);
                let mut word = Vec::with_capacity(max_k);
                let take = BLOCK.min(mc.samples - blk * BLOCK);
                for _ in 0..take {
                    orbit.clear();
                    word.clear();
                    let mut x = fs.sample(&mut rng);
                    orbit.push(x);
                    for t in 0..horizon {
                        if t < max_k {
                            word.push(fs.system().map().locate(x)?);
                        }
                        x = fs.system().step(x, &mut counters)?;
                        orbit.push(x);
                    }
                    for k in 1..=max_k {
                        let Some(&a) = index.get(&word[..k]) else { continue };
                        for (ni, &n) in n_grid.iter().enumerate() {
                            let y = orbit[n as usize + k];
                            let base = (ni * na + a) * nb;
                            for (b, test) in family_b.iter().enumerate() {
                                if y >= test.lo && y < test.hi {
                                    counts[base + b] += 1;
                                }
                            }
                        }
                    }
                }
                Ok((counts, counters))
            })
            .collect::<Result<_>>()?;
        let mut counts = vec![0u64; cells];
        let mut counters = Counters::default();
        for (c, k) in &parts {
            counts.iter_mut().zip(c).for_each(|(t, v)| *t += v);
            counters.merge(k);
        }
        Ok(JointCounts {
            n_grid: n_grid.to_vec(),
            prob_a: family_a.words.iter().map(|c| c.prob).collect(),
            prob_b: family_b.iter().map(|&b| fs.prob(b)).collect(),
            mass_b: family_b.iter().map(|&b| fs.weighted_mass(b, &|_| 1.0)).collect(),
            tests: family_b.to_vec(),
            descriptor: format!("{} x tests({})", family_a.descriptor(), family_b.len()),
            samples: mc.samples,
            counts,
            counters,
        })
    }

    pub fn family_size(&self) -> usize {
        self.prob_a.len() * self.prob_b.len()
    }

    /// Estimator of `kind` from these counts; `mu_density` is `dmu/dP` and
    /// is used by `ThetaMu` only (absent means `mu = P`).
    pub fn estimate(
        &self,
        fs: &FibredSystem,
        kind: CoefficientKind,
        mu_density: Option<&dyn Fn(f64) -> f64>,
    ) -> MixingEstimate {
        let (na, nb) = (self.prob_a.len(), self.prob_b.len());
        let mu_b: Vec<f64> = match (kind, mu_density) {
            (CoefficientKind::ThetaMu, Some(g)) => self.tests.iter().map(|&b| fs.weighted_mass(b, g)).collect(),
            _ => self.mass_b.clone(),
        };
        let n = self.samples as f64;
        let inflation = (2.0 * (self.family_size() as f64).ln()).sqrt().max(1.0);
        let mut values = Vec::with_capacity(self.n_grid.len());
        let mut se = Vec::with_capacity(self.n_grid.len());
        let mut cells = Vec::with_capacity(self.n_grid.len());
        let mut cell_se = Vec::with_capacity(self.n_grid.len());
        for ni in 0..self.n_grid.len() {
            let mut row = Vec::with_capacity(na * nb);
            let mut row_se = Vec::with_capacity(na * nb);
            for a in 0..na {
                for b in 0..nb {
                    let p = self.counts[(ni * na + a) * nb + b] as f64 / n;
                    let s = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
                    let prod = self.prob_a[a] * self.prob_b[b];
                    let (v, e) = match kind {
                        CoefficientKind::PsiStar => (p / prod, s / prod),
                        CoefficientKind::Psi => ((p - prod).abs() / prod, s / prod),
                        CoefficientKind::PhiMinus => ((p - prod).abs() / self.mass_b[b], s / self.mass_b[b]),
                        CoefficientKind::ThetaMu => ((p - prod).abs() / mu_b[b], s / mu_b[b]),
                    };
                    row.push(v);
                    row_se.push(e);
                }
            }
            let (arg, &best) = row
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
            values.push(best);
            se.push(row_se[arg] * inflation);
            cells.push(row);
            cell_se.push(row_se);
        }
        MixingEstimate {
            kind,
            n_grid: self.n_grid.clone(),
            values,
            se,
            family_size: self.family_size(),
            family_descriptor: self.descriptor.clone(),
            mu_given: mu_density.is_some() && kind == CoefficientKind::ThetaMu,
            cells,
            cell_se,
        }
    }
}

/// Supremum of a coefficient's defining ratio over a declared finite
/// family: a lower bound for the true coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingEstimate {
    pub kind: CoefficientKind,
    pub n_grid: Vec<u64>,
    pub values: Vec<f64>,
    /// Standard error of the maximizing cell, inflated by `sqrt(2 ln M)`
    /// for the maximum over `M` cells.
    pub se: Vec<f64>,
    pub family_size: usize,
    pub family_descriptor: String,
    pub mu_given: bool,
    /// Per-cell ratios, indexed `[n][a * |B| + b]`.
    pub cells: Vec<Vec<f64>>,
    pub cell_se: Vec<Vec<f64>>,
}

impl MixingEstimate {
    /// Rows `n,kind,value,se,family_size`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "kind", "value", "se", "family_size"])?;
        for i in 0..self.n_grid.len() {
            w.write_record([
                self.n_grid[i].to_string(),
                self.kind.as_str().to_string(),
                format!("{:.12e}", self.values[i]),
                format!("{:.12e}", self.se[i]),
                self.family_size.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn estimate_coefficient(
    fs: &FibredSystem,
    kind: CoefficientKind,
    n_grid: &[u64],
    family_a: &CylinderFamily,
    family_b: &[Interval],
    mu_density: Option<&dyn Fn(f64) -> f64>,
    mc: &MonteCarlo,
) -> Result<MixingEstimate> {
    let counts = JointCounts::collect(fs, n_grid, family_a, family_b, mc)?;
    Ok(counts.estimate(fs, kind, mu_density))
}

/// Fit `tau(n) = c * theta^n` to positive estimates by least squares in
/// `log tau`.
pub fn fit_exponential_decay(n_grid: &[u64], values: &[f64]) -> Result<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        n_grid.iter().zip(values).filter(|(_, v)| **v > 0.0).map(|(&n, &v)| (n as f64, v.ln())).unzip();
    let (a, b) = crate::numeric::least_squares(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("need two positive estimates to fit a decay".into()))?;
    Ok((a.exp(), b.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::test_intervals;

    fn doubling_counts(samples: usize) -> (FibredSystem, JointCounts) {
        let fs = FibredSystem::doubling();
        let fam = CylinderFamily::enumerate(&fs, 3, 0.0).unwrap();
        let tests = test_intervals(fs.domain(), 32);
        let jc = JointCounts::collect(&fs, &[1, 2, 4, 8], &fam, &tests, &MonteCarlo { samples, seed: 11 }).unwrap();
        (fs, jc)
    }

    #[test]
    fn doubling_is_independent() {
        let (fs, jc) = doubling_counts(200_000);
        let psi_star = jc.estimate(&fs, CoefficientKind::PsiStar, None);
        let psi = jc.estimate(&fs, CoefficientKind::Psi, None);
        let phi = jc.estimate(&fs, CoefficientKind::PhiMinus, None);
        for i in 0..4 {
            assert!((psi_star.values[i] - 1.0).abs() < 3.0 * psi_star.se[i]);
            assert!(psi.values[i] < 3.0 * psi.se[i]);
            assert!(phi.values[i] < 3.0 * phi.se[i]);
        }
    }

    #[test]
    fn theta_with_unit_density_is_phi_minus() {
        let (fs, jc) = doubling_counts(8192);
        let phi = jc.estimate(&fs, CoefficientKind::PhiMinus, None);
        let theta = jc.estimate(&fs, CoefficientKind::ThetaMu, Some(&|_| 1.0));
        assert_eq!(phi.cells, theta.cells);
        assert_eq!(phi.values, theta.values);
    }

    #[test]
    fn single_pair_is_the_cell_ratio() {
        let fs = FibredSystem::doubling();
        let mut fam = CylinderFamily::enumerate(&fs, 1, 0.0).unwrap();
        fam.words.truncate(1);
        let b = [Interval { lo: 0.0, hi: 0.5 }];
        let mc = MonteCarlo { samples: 10_000, seed: 3 };
        let jc = JointCounts::collect(&fs, &[3], &fam, &b, &mc).unwrap();
        let est = jc.estimate(&fs, CoefficientKind::PsiStar, None);
        assert_eq!(est.values[0], est.cells[0][0]);
        let p = jc.counts[0] as f64 / 10_000.0;
        assert!((est.values[0] - p / (0.5 * fs.prob(b[0]))).abs() < 1e-12);
    }

    #[test]
    fn counts_do_not_depend_on_threads() {
        let (_, a) = doubling_counts(3 * BLOCK + 17);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (_, b) = pool.install(|| doubling_counts(3 * BLOCK + 17));
        assert_eq!(a, b);
    }

    #[test]
    fn decay_fit() {
        let ns = [1u64, 2, 3, 4];
        let vals: Vec<f64> = ns.iter().map(|&n| 2.0 * 0.5f64.powi(n as i32)).collect();
        let (c, theta) = fit_exponential_decay(&ns, &vals).unwrap();
        assert!((c - 2.0).abs() < 1e-12 && (theta - 0.5).abs() < 1e-12);
    }
}
