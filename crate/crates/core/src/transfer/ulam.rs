use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{Interval, IntervalMapSystem};

/// Branches assembled explicitly for maps with countably many branches; the
/// remainder is lumped onto the last explicit branch's image profile.
pub const ULAM_MAX_BRANCHES: usize = 1 << 14;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 2_000_000;

/// Row-stochastic discretization `L[i][j] = m(C_i ∩ T^{-1} C_j) / m(C_i)`.
///
/// States are the cells of the window plus one lumped state for each
/// nonempty component of the domain outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator {
    edges: Vec<f64>,
    window: Interval,
    first_window: usize,
    n_window: usize,
    rows: Vec<Vec<(usize, f64)>>,
    leakage: Vec<f64>,
}

impl UlamOperator {
    pub fn window(&self) -> Interval {
        self.window
    }

    /// Edges of the window cells.
    pub fn cell_edges(&self) -> &[f64] {
        &self.edges[self.first_window..=self.first_window + self.n_window]
    }

    pub fn n_cells(&self) -> usize {
        self.n_window
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// State index of window cell `k`.
    pub fn window_state(&self, k: usize) -> usize {
        self.first_window + k
    }

    pub fn state(&self, s: usize) -> Interval {
        Interval { lo: self.edges[s], hi: self.edges[s + 1] }
    }

    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn row_sum(&self, s: usize) -> f64 {
        self.rows[s].iter().map(|e| e.1).sum()
    }

    /// Mass per state that leaves the domain covered by the states.
    pub fn leakage(&self) -> &[f64] {
        &self.leakage
    }

    /// Sparse entries as `i,j,value` rows over state indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "value"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                w.write_record([i.to_string(), j.to_string(), format!("{v:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn from_masses(edges: Vec<f64>, window: Interval, first_window: usize, n_window: usize, masses: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut rows = Vec::with_capacity(masses.len());
        let mut leakage = Vec::with_capacity(masses.len());
        for (i, m) in masses.into_iter().enumerate() {
            let len = edges[i + 1] - edges[i];
            let row: Vec<(usize, f64)> = m.into_iter().filter(|e| e.1 > 0.0).map(|(j, v)| (j, v / len)).collect();
            let sum: f64 = row.iter().map(|e| e.1).sum();
            leakage.push((1.0 - sum).max(0.0));
            rows.push(row);
        }
        UlamOperator { edges, window, first_window, n_window, rows, leakage }
    }
}

fn state_edges(domain: Interval, window: Interval, n_cells: usize) -> (Vec<f64>, usize) {
    let mut edges = Vec::with_capacity(n_cells + 3);
    let tiny = 1e-15 * domain.len();
    let mut first = 0;
    if window.lo > domain.lo + tiny {
        edges.push(domain.lo);
        first = 1;
    }
    let w = window.len() / n_cells as f64;
    edges.extend((0..n_cells).map(|k| window.lo + k as f64 * w));
    edges.push(window.hi);
    if window.hi < domain.hi - tiny {
        edges.push(domain.hi);
    }
    (edges, first)
}

/// States overlapping `(lo, hi)`.
fn states_over(edges: &[f64], lo: f64, hi: f64) -> std::ops::Range<usize> {
    let n = edges.len() - 1;
    let a = edges.partition_point(|&e| e <= lo).saturating_sub(1);
    let b = edges.partition_point(|&e| e < hi).min(n);
    a.min(n)..b
}

/// Lebesgue masses `|v_a(C_j ∩ I_a) ∩ C_i|` contributed by one branch.
fn branch_masses(system: &IntervalMapSystem, edges: &[f64], a: usize, dom: Interval) -> Result<Vec<(usize, usize, f64)>> {
    let image = system.map().branch_image(a);
    let mut out = Vec::new();
    for j in states_over(edges, image.lo, image.hi) {
        let lo = edges[j].max(image.lo);
        let hi = edges[j + 1].min(image.hi);
        if hi <= lo {
            continue;
        }
        let pre_lo = if lo <= image.lo { dom.lo } else { system.invert_branch(a, lo, 1e-15)? };
        let pre_hi = if hi >= image.hi { dom.hi } else { system.invert_branch(a, hi, 1e-15)? };
        for i in states_over(edges, pre_lo, pre_hi) {
            let m = pre_hi.min(edges[i + 1]) - pre_lo.max(edges[i]);
            if m > 0.0 {
                out.push((i, j, m));
            }
        }
    }
    Ok(out)
}

/// Ulam operator assembled from branch inverses. Preimages of cells are
/// intervals, so entries are exact up to the accuracy of the inverses.
pub fn build_ulam(system: &IntervalMapSystem, n_cells: usize, window: Interval) -> Result<UlamOperator> {
    let domain = system.domain();
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!("n_cells = {n_cells} must be at least 2")));
    }
    if !(window.lo >= domain.lo && window.hi <= domain.hi && window.len() > 0.0) {
        return Err(Error::InvalidArgument(format!("window {window} must lie within {domain}")));
    }
    let (edges, first) = state_edges(domain, window, n_cells);
    let map = system.map();
    let count = map.branch_count().unwrap_or(ULAM_MAX_BRANCHES);
    let branches: Vec<(usize, Interval)> = (0..count).map_while(|a| map.branch_domain(a).map(|d| (a, d))).collect();
    let parts: Vec<Vec<(usize, usize, f64)>> =
        branches.par_iter().map(|&(a, d)| branch_masses(system, &edges, a, d)).collect::<Result<_>>()?;
    let mut masses = vec![BTreeMap::new(); edges.len() - 1];
    for part in &parts {
        for &(i, j, m) in part {
            *masses[i].entry(j).or_insert(0.0) += m;
        }
    }
    if map.branch_count().is_none() {
        lump_tail(&edges, &branches, parts.last(), domain, &mut masses);
    }
    Ok(UlamOperator::from_masses(edges, window, first, n_cells, masses))
}

/// Assign the domain not covered by explicit branches with the image
/// profile of the last explicit branch.
fn lump_tail(
    edges: &[f64],
    branches: &[(usize, Interval)],
    last: Option<&Vec<(usize, usize, f64)>>,
    domain: Interval,
    masses: &mut [BTreeMap<usize, f64>],
) {
    let (Some(&(_, last_dom)), Some(last)) = (branches.last(), last) else { return };
    let lo = branches.iter().map(|b| b.1.lo).fold(f64::INFINITY, f64::min);
    let hi = branches.iter().map(|b| b.1.hi).fold(f64::NEG_INFINITY, f64::max);
    let rest = if lo - domain.lo > domain.hi - hi {
        Interval { lo: domain.lo, hi: lo }
    } else {
        Interval { lo: hi, hi: domain.hi }
    };
    if rest.len() <= 0.0 {
        return;
    }
    let mut profile: BTreeMap<usize, f64> = BTreeMap::new();
    for &(_, j, m) in last {
        *profile.entry(j).or_insert(0.0) += m / last_dom.len();
    }
    for i in states_over(edges, rest.lo, rest.hi) {
        let share = rest.hi.min(edges[i + 1]) - rest.lo.max(edges[i]);
        if share <= 0.0 {
            continue;
        }
        for (&j, &p) in &profile {
            *masses[i].entry(j).or_insert(0.0) += share * p;
        }
    }
}

/// Ulam operator over the window only, with rows estimated from
/// `per_cell` evenly spaced points per cell; mass leaving the window is
/// recorded as leakage.
pub fn build_ulam_sampled<F>(step: F, window: Interval, n_cells: usize, per_cell: usize) -> Result<UlamOperator>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if n_cells < 2 || per_cell == 0 {
        return Err(Error::InvalidArgument("need n_cells >= 2 and per_cell >= 1".into()));
    }
    let w = window.len() / n_cells as f64;
    let mut edges: Vec<f64> = (0..n_cells).map(|k| window.lo + k as f64 * w).collect();
    edges.push(window.hi);
    let masses: Vec<BTreeMap<usize, f64>> = (0..n_cells)
        .into_par_iter()
        .map(|i| {
            let mut row = BTreeMap::new();
            let share = w / per_cell as f64;
            for k in 0..per_cell {
                let x = edges[i] + (k as f64 + 0.5) * share;
                let y = step(x)?;
                if window.contains(y) {
                    let j = (((y - window.lo) / w) as usize).min(n_cells - 1);
                    *row.entry(j).or_insert(0.0) += share;
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(UlamOperator::from_masses(edges, window, 0, n_cells, masses))
}

/// Invariant density on the window cells, normalized to `ref_mass` on
/// `ref_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamDensity {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl UlamDensity {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        if !(x >= self.edges[0] && x < *self.edges.last()?) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x) - 1;
        self.values.get(k).copied()
    }
}

fn reaches_all(n: usize, adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(s) = queue.pop_front() {
        for &t in &adjacency[s] {
            if !seen[t] {
                seen[t] = true;
                count += 1;
                queue.push_back(t);
            }
        }
    }
    count == n
}

fn reducibility(op: &UlamOperator) -> Option<String> {
    let n = op.n_states();
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for (i, row) in op.rows.iter().enumerate() {
        for &(j, v) in row {
            if v > 0.0 {
                fwd[i].push(j);
                bwd[j].push(i);
            }
        }
    }
    if !reaches_all(n, &fwd) {
        return Some("some state is unreachable from state 0".into());
    }
    if !reaches_all(n, &bwd) {
        return Some("state 0 is unreachable from some state".into());
    }
    None
}

/// Stationary vector of the operator by power iteration of the lazy chain,
/// reported as a density on the window cells.
pub fn invariant_density_ulam(op: &UlamOperator, ref_set: Interval, ref_mass: f64) -> Result<UlamDensity> {
    if !(ref_mass > 0.0) || op.window.overlap(&ref_set) <= 0.0 {
        return Err(Error::InvalidArgument("ref_set must meet the window and ref_mass must be positive".into()));
    }
    if let Some(msg) = reducibility(op) {
        return Err(Error::Reducible(msg));
    }
    let n = op.n_states();
    let total: f64 = op.edges[n] - op.edges[0];
    let mut p: Vec<f64> = (0..n).map(|s| op.state(s).len() / total).collect();
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        if iterations == POWER_MAX_ITER {
            return Err(Error::NoConvergence(format!("power iteration after {iterations} steps")));
        }
        iterations += 1;
        next.iter_mut().zip(&p).for_each(|(q, &v)| *q = 0.5 * v);
        for (i, row) in op.rows.iter().enumerate() {
            let w = 0.5 * p[i];
            for &(j, v) in row {
                next[j] += w * v;
            }
        }
        let sum: f64 = next.iter().sum();
        let mut change: f64 = 0.0;
        let mut top: f64 = 0.0;
        for (a, b) in p.iter_mut().zip(next.iter()) {
            let v = b / sum;
            change = change.max((v - *a).abs());
            top = top.max(v);
            *a = v;
        }
        if change <= POWER_TOL * top {
            break;
        }
    }
    let edges = op.cell_edges().to_vec();
    let mut values: Vec<f64> =
        (0..op.n_window).map(|k| p[op.window_state(k)] / (edges[k + 1] - edges[k])).collect();
    let mass: f64 = values
        .iter()
        .enumerate()
        .map(|(k, d)| d * Interval { lo: edges[k], hi: edges[k + 1] }.overlap(&ref_set))
        .sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("computed density has no mass on ref_set".into()));
    }
    values.iter_mut().for_each(|v| *v *= ref_mass / mass);
    Ok(UlamDensity { edges, values, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    #[test]
    fn doubling_rows() {
        let op = build_ulam(&IntervalMapSystem::doubling(), 4, UNIT).unwrap();
        assert_eq!(op.n_states(), 4);
        for i in 0..4 {
            let row = op.row(i);
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|e| (e.1 - 0.5).abs() < 1e-15));
            assert!((op.row_sum(i) - 1.0).abs() < 1e-12);
        }
        let d = invariant_density_ulam(&op, UNIT, 1.0).unwrap();
        assert!(d.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn identity_is_reducible() {
        let op = build_ulam(&IntervalMapSystem::identity(), 8, UNIT).unwrap();
        for i in 0..8 {
            assert_eq!(op.row(i), &[(i, 1.0)]);
        }
        assert!(matches!(invariant_density_ulam(&op, UNIT, 1.0), Err(Error::Reducible(_))));
    }

    #[test]
    fn boole_window_has_lumped_exterior() {
        let w = Interval { lo: 0.05, hi: 1.0 };
        let op = build_ulam(&IntervalMapSystem::boole_like(), 64, w).unwrap();
        assert_eq!(op.n_states(), 65);
        assert_eq!(op.cell_edges().len(), 65);
        for s in 0..op.n_states() {
            assert!((op.row_sum(s) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn countable_rows_conserve_mass() {
        let op = build_ulam(&IntervalMapSystem::boole_induced(), 32, Interval { lo: 0.5, hi: 1.0 }).unwrap();
        for s in 0..op.n_states() {
            assert!((op.row_sum(s) - 1.0).abs() < 1e-10, "{s}: {}", op.row_sum(s));
        }
        let d = invariant_density_ulam(&op, Interval { lo: 0.5, hi: 1.0 }, 1.0).unwrap();
        for (x, v) in d.centers().iter().zip(&d.values) {
            let exact = 1.0 / (x * LN_2);
            assert!((v - exact).abs() < 0.02 * exact, "{x}: {v} vs {exact}");
        }
    }

    #[test]
    fn sampled_matches_exact_on_doubling() {
        let s = IntervalMapSystem::doubling();
        let op = build_ulam_sampled(|x| s.evaluate(x).map(|r| r.0), UNIT, 8, 64).unwrap();
        let exact = build_ulam(&s, 8, UNIT).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((op.entry(i, j) - exact.entry(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_export() {
        let op = build_ulam(&IntervalMapSystem::doubling(), 2, UNIT).unwrap();
        let mut buf = Vec::new();
        op.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("i,j,value\n0,0,"));
    }
}
