//! Transfer operator of a piecewise map acting on Lebesgue densities, its
//! Ulam discretization, and dual ergodic averages.

mod ulam;

pub use ulam::{build_ulam, build_ulam_sampled, invariant_density_ulam, UlamDensity, UlamOperator};

use crate::asymptotics::ReturnSequence;
use crate::error::{Error, Result};
use crate::maps::{Interval, IntervalMapSystem, RealFn};
use crate::numeric::{dyadic_grid, integrate};

/// A nonnegative density with the interval on which it is positive.
#[derive(Clone)]
pub struct DensityFn {
    pub eval: RealFn,
    pub integrable: bool,
    pub support: Interval,
}

impl DensityFn {
    pub fn new(eval: RealFn, integrable: bool, support: Interval) -> Self {
        DensityFn { eval, integrable, support }
    }

    /// The reference density of `system`.
    pub fn reference(system: &IntervalMapSystem) -> Self {
        let s = system.clone();
        DensityFn {
            eval: std::sync::Arc::new(move |x| s.ref_density(x)),
            integrable: system.map().density_integrable(),
            support: system.domain(),
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

impl std::fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityFn").field("integrable", &self.integrable).field("support", &self.support).finish()
    }
}

/// Controls for summing countably many branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOptions {
    /// Accepted error of the truncated branch sum at each point.
    pub tail_tol: f64,
    /// Branches summed explicitly before the tail is integrated, for maps
    /// that interpolate their inverse branches.
    pub explicit_branches: usize,
    /// Hard cap on explicit branches for maps without interpolation.
    pub max_branches: usize,
    /// Declared bound on `|f|`; estimated by sampling when absent.
    pub sup_f: Option<f64>,
    /// Nodes of the interpolation grid used by `transfer_iterate`.
    pub grid: usize,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions { tail_tol: 1e-12, explicit_branches: 4096, max_branches: 1 << 20, sup_f: None, grid: 4096 }
    }
}

/// Values of a transferred function with per-point error estimates of the
/// branch-tail sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Transferred {
    pub values: Vec<f64>,
    pub tail_error: Vec<f64>,
}

impl Transferred {
    pub fn max_error(&self) -> f64 {
        self.tail_error.iter().cloned().fold(0.0, f64::max)
    }
}

const INVERSE_TOL: f64 = 1e-15;

fn check_points(system: &IntervalMapSystem, pts: &[f64]) -> Result<()> {
    let d = system.domain();
    match pts.iter().find(|&&y| !(y >= d.lo && y <= d.hi)) {
        Some(&y) => Err(Error::OutsideDomain { x: y, lo: d.lo, hi: d.hi }),
        None => Ok(()),
    }
}

fn branch_term(system: &IntervalMapSystem, f: &dyn Fn(f64) -> f64, i: usize, y: f64) -> Result<f64> {
    let map = system.map();
    if !map.branch_image(i).contains(y) {
        return Ok(0.0);
    }
    let x = system.invert_branch(i, y, INVERSE_TOL)?;
    Ok(f(x) / map.derivative(i, x))
}

fn sample_sup(f: &dyn Fn(f64) -> f64, region: Interval) -> f64 {
    (0..=32)
        .map(|k| f(region.lo + region.len() * (k as f64 + 0.5) / 33.0).abs())
        .fold(0.0, f64::max)
        * 2.0
}

/// `(Sf)(y)` and its tail error at one point.
fn transfer_at(system: &IntervalMapSystem, f: &dyn Fn(f64) -> f64, y: f64, opts: &TransferOptions) -> Result<(f64, f64)> {
    let map = system.map();
    if let Some(n) = map.branch_count() {
        let mut sum = 0.0;
        for i in 0..n {
            sum += branch_term(system, f, i, y)?;
        }
        return Ok((sum, 0.0));
    }
    if map.interpolates_branches() {
        let n = opts.explicit_branches.max(1);
        let mut sum = 0.0;
        for i in 0..n {
            if map.branch_domain(i).is_none() {
                return Ok((sum, 0.0));
            }
            sum += branch_term(system, f, i, y)?;
        }
        let (tail, err) = family_tail(system, f, y, n as f64 - 0.5)?;
        if err > opts.tail_tol {
            return Err(Error::NoConvergence(format!("branch tail at y = {y}: estimate {err:e}")));
        }
        return Ok((sum + tail, err));
    }
    let domain = system.domain();
    let mut covered = 0.0;
    let mut sum = 0.0;
    for i in 0..opts.max_branches {
        let d = match map.branch_domain(i) {
            Some(d) => d,
            None => break,
        };
        sum += branch_term(system, f, i, y)?;
        covered += d.len();
        let rest = (domain.len() - covered).max(0.0);
        let rest_region = Interval { lo: d.hi, hi: domain.hi.max(d.hi + rest) };
        let sup = opts.sup_f.unwrap_or_else(|| sample_sup(f, rest_region));
        let bound = sup * rest / map.branch_image(i).len();
        if bound < opts.tail_tol {
            return Ok((sum, bound));
        }
    }
    let rest = (domain.len() - covered).max(0.0);
    let bound = opts.sup_f.unwrap_or(1.0) * rest;
    if bound < opts.tail_tol {
        return Ok((sum, bound));
    }
    Err(Error::NoConvergence(format!("branch tail at y = {y}: bound {bound:e}")))
}

/// `sum_{i > t0} g(i)` for `g(t) = f(v_t(y)) v_t'(y)`, by quadrature with
/// a midpoint Euler-Maclaurin correction.
fn family_tail(system: &IntervalMapSystem, f: &dyn Fn(f64) -> f64, y: f64, t0: f64) -> Result<(f64, f64)> {
    let map = system.map();
    let g = |t: f64| map.inverse_family(t, y).map_or(0.0, |(x, dx)| f(x) * dx);
    let h = |u: f64| {
        let w = 1.0 - u;
        g(t0 + u / w) / (w * w)
    };
    let (value, quad_err) = integrate(h, 0.0, 1.0, 1e-14);
    let dt = 0.25;
    let slope = (g(t0 + dt) - g(t0 - dt)) / (2.0 * dt);
    let correction = slope / 24.0;
    Ok((value + correction, quad_err + 0.1 * correction.abs()))
}

/// `(Sf)(y)` at each point by the inverse-branch formula.
pub fn transfer_apply(system: &IntervalMapSystem, f: &dyn Fn(f64) -> f64, pts: &[f64]) -> Result<Transferred> {
    transfer_apply_with(system, f, pts, &TransferOptions::default())
}

pub fn transfer_apply_with(
    system: &IntervalMapSystem,
    f: &dyn Fn(f64) -> f64,
    pts: &[f64],
    opts: &TransferOptions,
) -> Result<Transferred> {
    check_points(system, pts)?;
    let mut values = Vec::with_capacity(pts.len());
    let mut tail_error = Vec::with_capacity(pts.len());
    for &y in pts {
        let (v, e) = transfer_at(system, f, y, opts)?;
        values.push(v);
        tail_error.push(e);
    }
    Ok(Transferred { values, tail_error })
}

/// Probability-preserving operator `S_P f = S(h f) / h`.
pub fn transfer_apply_prob(
    system: &IntervalMapSystem,
    density: &DensityFn,
    f: &dyn Fn(f64) -> f64,
    pts: &[f64],
) -> Result<Transferred> {
    if let Some(&y) = pts.iter().find(|&&y| !density.support.contains(y)) {
        return Err(Error::OutsideDomain { x: y, lo: density.support.lo, hi: density.support.hi });
    }
    let hf = |x: f64| density.at(x) * f(x);
    let mut out = transfer_apply(system, &hf, pts)?;
    for (v, &y) in out.values.iter_mut().zip(pts) {
        *v /= density.at(y);
    }
    Ok(out)
}

/// Iterates of the operator held on a grid as quotients by the reference
/// density, so invariant densities are represented exactly.
struct GridState {
    lo: f64,
    step: f64,
    quotient: Vec<f64>,
}

impl GridState {
    fn nodes(domain: Interval, n: usize) -> Vec<f64> {
        let step = domain.len() / n as f64;
        (0..n).map(|k| domain.lo + (k as f64 + 0.5) * step).collect()
    }

    /// Catmull-Rom interpolation of the quotient, constant beyond the end
    /// nodes.
    fn quotient_at(&self, x: f64) -> f64 {
        let q = &self.quotient;
        let n = q.len();
        let u = (x - self.lo) / self.step - 0.5;
        if u <= 0.0 {
            return q[0];
        }
        if u >= (n - 1) as f64 {
            return q[n - 1];
        }
        let k = u.floor() as usize;
        let s = u - k as f64;
        let p0 = q[k.saturating_sub(1)];
        let p1 = q[k];
        let p2 = q[(k + 1).min(n - 1)];
        let p3 = q[(k + 2).min(n - 1)];
        p1 + 0.5 * s * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

struct Iteration<'a> {
    system: &'a IntervalMapSystem,
    opts: TransferOptions,
    nodes: Vec<f64>,
    state: GridState,
    error: f64,
}

impl<'a> Iteration<'a> {
    /// Grid holding `S f`, with the first step taken on `f` itself.
    fn new(system: &'a IntervalMapSystem, f: &dyn Fn(f64) -> f64, opts: &TransferOptions) -> Result<Self> {
        let domain = system.domain();
        let n = opts.grid.max(4);
        let nodes = GridState::nodes(domain, n);
        let first = transfer_apply_with(system, f, &nodes, opts)?;
        let quotient = first.values.iter().zip(&nodes).map(|(v, &x)| v / system.ref_density(x)).collect();
        let state = GridState { lo: domain.lo, step: domain.len() / n as f64, quotient };
        Ok(Iteration { system, opts: *opts, nodes, state, error: first.max_error() })
    }

    fn current(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.system.ref_density(x) * self.state.quotient_at(x)
    }

    /// Transfer the current iterate to `pts` without advancing.
    fn transfer_to(&self, pts: &[f64]) -> Result<Transferred> {
        let g = self.current();
        transfer_apply_with(self.system, &g, pts, &self.opts)
    }

    fn advance(&mut self) -> Result<()> {
        let next = self.transfer_to(&self.nodes)?;
        self.error += next.max_error();
        self.state.quotient = next.values.iter().zip(&self.nodes).map(|(v, &x)| v / self.system.ref_density(x)).collect();
        Ok(())
    }
}

/// `S^k f` at each point, `k >= 1`, by repeated pullback of a grid
/// representation. Cost is linear in `k`.
pub fn transfer_iterate(
    system: &IntervalMapSystem,
    f: &dyn Fn(f64) -> f64,
    k: usize,
    pts: &[f64],
) -> Result<Transferred> {
    transfer_iterate_with(system, f, k, pts, &TransferOptions::default())
}

pub fn transfer_iterate_with(
    system: &IntervalMapSystem,
    f: &dyn Fn(f64) -> f64,
    k: usize,
    pts: &[f64],
    opts: &TransferOptions,
) -> Result<Transferred> {
    if k == 0 {
        return Err(Error::InvalidArgument("transfer_iterate needs k >= 1".into()));
    }
    check_points(system, pts)?;
    if k == 1 {
        return transfer_apply_with(system, f, pts, opts);
    }
    let mut it = Iteration::new(system, f, opts)?;
    for _ in 2..k - 1 {
        it.advance()?;
    }
    // The last step evaluates the exact branch sum at the requested points.
    let mut out = it.transfer_to(pts)?;
    let carried = it.error;
    out.tail_error.iter_mut().for_each(|e| *e += carried);
    Ok(out)
}

/// Dual ergodic averages `(1/a_n) sum_{k<n} S^k f` at the points.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAverage {
    pub n: u64,
    pub a_n: f64,
    pub values: Vec<f64>,
}

/// Dual ergodic averages on the dyadic grid up to `n`.
pub fn dual_ergodic_avg(
    system: &IntervalMapSystem,
    f: &dyn Fn(f64) -> f64,
    n: u64,
    a_seq: &ReturnSequence,
    pts: &[f64],
) -> Result<Vec<DualAverage>> {
    dual_ergodic_avg_with(system, f, n, a_seq, pts, &TransferOptions::default())
}

pub fn dual_ergodic_avg_with(
    system: &IntervalMapSystem,
    f: &dyn Fn(f64) -> f64,
    n: u64,
    a_seq: &ReturnSequence,
    pts: &[f64],
    opts: &TransferOptions,
) -> Result<Vec<DualAverage>> {
    check_points(system, pts)?;
    let grid = dyadic_grid(1, n);
    let mut a_vals = Vec::with_capacity(grid.len());
    for &m in &grid {
        match a_seq.value_at(m) {
            Some(a) if a > 0.0 => a_vals.push(a),
            _ => return Err(Error::InvalidArgument(format!("a_{m} must be available and positive"))),
        }
    }
    let mut sums: Vec<f64> = pts.iter().map(|&y| f(y)).collect();
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut it: Option<Iteration> = None;
    for k in 1..=n {
        if grid[next] == k {
            out.push(DualAverage { n: k, a_n: a_vals[next], values: sums.iter().map(|s| s / a_vals[next]).collect() });
            next += 1;
            if next == grid.len() {
                break;
            }
        }
        // Add S^k f: exact for k = 1, then from the grid holding S^{k-1} f.
        let step = match it.as_mut() {
            None => {
                it = Some(Iteration::new(system, f, opts)?);
                transfer_apply_with(system, f, pts, opts)?
            }
            Some(state) => {
                let v = state.transfer_to(pts)?;
                state.advance()?;
                v
            }
        };
        sums.iter_mut().zip(&step.values).for_each(|(s, v)| *s += v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn boole_fixed_point() {
        let s = IntervalMapSystem::boole_like();
        let pts = [0.1, 0.5, 0.9];
        let out = transfer_apply(&s, &|x| 1.0 / x, &pts).unwrap();
        for (v, y) in out.values.iter().zip(pts) {
            assert!((v * y - 1.0).abs() < 1e-12);
        }
        let zero = transfer_apply(&s, &|_| 0.0, &pts).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_is_preserved() {
        let s = IntervalMapSystem::boole_like();
        let f = |x: f64| if x > 0.2 && x < 0.4 { 1.0 } else { 0.0 };
        let sf = |y: f64| transfer_apply(&s, &f, &[y]).unwrap().values[0];
        // Discontinuities of Sf sit at the images of 0.2 and 0.4.
        let cuts = [0.0, 0.25, 2.0 / 3.0, 1.0];
        let total: f64 = cuts.windows(2).map(|w| integrate(sf, w[0], w[1], 1e-10).0).sum();
        assert!((total - 0.2).abs() < 1e-6, "{total}");
    }

    #[test]
    fn iterate_examples() {
        let d = IntervalMapSystem::doubling();
        let pts = grid(7);
        let one = transfer_iterate(&d, &|_| 1.0, 6, &pts).unwrap();
        assert!(one.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let b = IntervalMapSystem::boole_like();
        let out = transfer_iterate(&b, &|x| 1.0 / x, 5, &pts).unwrap();
        for (v, y) in out.values.iter().zip(&pts) {
            assert!((v * y - 1.0).abs() < 1e-9);
        }
        let f = |x: f64| x * x;
        let a = transfer_iterate(&b, &f, 1, &pts).unwrap();
        assert_eq!(a, transfer_apply(&b, &f, &pts).unwrap());
        assert!(transfer_iterate(&b, &f, 0, &pts).is_err());
    }

    #[test]
    fn iterate_tracks_exact_composition() {
        // Two steps of the doubling map on x^2: S^2 f(y) = mean of f((y+j)/4).
        let d = IntervalMapSystem::doubling();
        let pts = grid(9);
        let out = transfer_iterate(&d, &|x| x * x, 2, &pts).unwrap();
        for (v, y) in out.values.iter().zip(&pts) {
            let exact: f64 = (0..4).map(|j| ((y + j as f64) / 4.0).powi(2)).sum::<f64>() / 4.0;
            assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
        }
    }

    #[test]
    fn countable_tail_is_summed() {
        // The induced Boole map preserves 1/x on (1/2, 1).
        let s = IntervalMapSystem::boole_induced();
        let pts = [0.55, 0.75, 0.95];
        let out = transfer_apply(&s, &|x| 1.0 / x, &pts).unwrap();
        for (v, y) in out.values.iter().zip(pts) {
            assert!((v * y - 1.0).abs() < 1e-10, "{}", v * y - 1.0);
        }
        assert!(out.max_error() < 1e-12);
    }

    #[test]
    fn thaler_mass_is_preserved() {
        use crate::maps::PartitionRule;
        let s = IntervalMapSystem::thaler(0.5, PartitionRule::FullImage).unwrap();
        let f = |x: f64| if x > 0.3 && x < 0.9 { 1.0 } else { 0.0 };
        let opts = TransferOptions { tail_tol: 1e-9, ..Default::default() };
        let sf = |y: f64| transfer_apply_with(&s, &f, &[y], &opts).unwrap().values[0];
        let mut cuts = vec![0.0, s.evaluate(0.3).unwrap().0, s.evaluate(0.9).unwrap().0, 1.0];
        cuts.sort_by(f64::total_cmp);
        let total: f64 = cuts.windows(2).map(|w| integrate(sf, w[0], w[1], 1e-10).0).sum();
        assert!((total - 0.6).abs() < 1e-8, "{total}");
    }

    #[test]
    fn prob_operator_fixes_constants() {
        let s = IntervalMapSystem::boole_induced();
        let h = DensityFn::reference(&s);
        let out = transfer_apply_prob(&s, &h, &|_| 1.0, &[0.6, 0.8]).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn dual_average_examples() {
        let d = IntervalMapSystem::doubling();
        let a = ReturnSequence::analytic(|n| n as f64, 64);
        let rows = dual_ergodic_avg(&d, &|_| 1.0, 64, &a, &[0.3, 0.7]).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|r| r.values.iter().all(|v| (v - 1.0).abs() < 1e-12)));
        let f = |x: f64| x;
        let first = &dual_ergodic_avg(&d, &f, 1, &a, &[0.3]).unwrap()[0];
        assert_eq!(first.values[0], 0.3);
    }
}
