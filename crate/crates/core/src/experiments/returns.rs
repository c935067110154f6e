//! Runners built on return-time sums `phi_n = phi + phi∘S + ... + phi∘S^{n-1}`.

use rayon::prelude::*;

use super::{
    calibration_ks, draw_starts, normalized_sorted, ExperimentConfig, ExperimentKind, Normalize, ResultTable,
    StableSource, TauRule, Verdict,
};
use crate::asymptotics::{asymptotic_inverse, correlation_a, fit_regvar, renewal_residual, ReturnSequence, SequenceSource};
use crate::error::{Error, Result};
use crate::limit_laws::{ks_distance, lil_constants, PositiveStableDist};
use crate::maps::{visit_times, Counters, InducedSystem};
use crate::numeric::{mean_se, median};
use crate::rng::{open01, stream, tag, Stream};

/// Where return times come from.
enum Source {
    Induced(InducedSystem),
    /// iid with `P[phi >= k] = k^{-gamma}`.
    Pareto(f64),
    Constant(u64),
}

struct Walker<'a> {
    source: &'a Source,
    x: f64,
    rng: Stream,
}

impl Walker<'_> {
    /// Next return time, or `None` when the return cap was hit.
    fn next(&mut self, counters: &mut Counters) -> Result<Option<f64>> {
        match self.source {
            Source::Induced(ind) => match ind.next_return(self.x, counters) {
                Ok((t, z)) => {
                    self.x = z;
                    Ok(Some(t as f64))
                }
                Err(Error::ReturnCapExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            Source::Pareto(g) => Ok(Some(open01(&mut self.rng).powf(-1.0 / g).floor())),
            Source::Constant(c) => Ok(Some(*c as f64)),
        }
    }
}

/// Dyadic time points at which `a(t) = E #{k >= 1 : phi_k <= t}` is tallied.
fn time_grid() -> Vec<f64> {
    (0..62).map(|k| (1u64 << k) as f64).collect()
}

/// One trajectory's partial sums on the grid, censoring and tallies.
struct Scan {
    sums: Vec<f64>,
    /// First grid index whose sum is only a lower bound.
    censored: Option<usize>,
    /// `#{k : phi_k <= t}` per time point below `resolved`, if tallied.
    counts: Option<Vec<u64>>,
    /// Running minimum of the LIL ratio after the first grid point.
    running_min: Vec<f64>,
    counters: Counters,
}

/// Normaliser `n -> b(n / tau(n)) tau(n)` of the LIL ratio.
struct LilScale {
    log_m: Vec<f64>,
    log_b: Vec<f64>,
    /// `b` is extrapolated above this `m`.
    m_table: f64,
    tau: TauRule,
    tau_constant: f64,
}

impl LilScale {
    fn tau(&self, n: f64) -> f64 {
        match self.tau {
            TauRule::Loglog => n.ln().ln(),
            TauRule::Constant => self.tau_constant,
        }
    }

    fn b(&self, m: f64) -> f64 {
        let lm = m.ln();
        let i = self.log_m.partition_point(|&v| v < lm).clamp(1, self.log_m.len() - 1);
        let (x0, x1) = (self.log_m[i - 1], self.log_m[i]);
        let (y0, y1) = (self.log_b[i - 1], self.log_b[i]);
        (y0 + (lm - x0) / (x1 - x0) * (y1 - y0)).exp()
    }

    fn normaliser(&self, n: f64) -> f64 {
        let t = self.tau(n);
        self.b(n / t) * t
    }
}

fn scan(
    source: &Source,
    x0: f64,
    rng: Stream,
    grid: &[u64],
    keep_counts: bool,
    lil: Option<&LilScale>,
    cap: u64,
) -> Result<Scan> {
    let times = time_grid();
    let n_max = *grid.last().unwrap();
    let mut w = Walker { source, x: x0, rng };
    let mut counters = Counters::default();
    let mut sums = Vec::with_capacity(grid.len());
    let mut counts = Vec::new();
    let mut running_min = Vec::new();
    let mut censored = None;
    let mut s = 0.0f64;
    let mut gi = 0;
    let mut ti = 0;
    let mut rmin = f64::INFINITY;
    let lil_from = grid[0].max(16);
    for k in 1..=n_max {
        let Some(phi) = w.next(&mut counters)? else {
            censored = Some(gi);
            s += cap as f64;
            break;
        };
        s += phi;
        if keep_counts {
            while ti < times.len() && times[ti] < s {
                counts.push(k - 1);
                ti += 1;
            }
        }
        if let Some(scale) = lil {
            if k >= lil_from {
                rmin = rmin.min(s / scale.normaliser(k as f64));
            }
        }
        if k == grid[gi] {
            sums.push(s);
            running_min.push(rmin);
            gi += 1;
        }
    }
    let resolved = if censored.is_some() { s - cap as f64 } else { s };
    counts.truncate(times.partition_point(|&t| t < resolved));
    let counts = keep_counts.then_some(counts);
    while sums.len() < grid.len() {
        sums.push(s);
        running_min.push(rmin);
    }
    Ok(Scan { sums, censored, counts, running_min, counters })
}

fn make_source(cfg: &ExperimentConfig, kind: StableSource) -> Result<Source> {
    Ok(match kind {
        StableSource::Induced => Source::Induced(InducedSystem::new(cfg.system()?, cfg.set_interval()?, cfg.run.return_cap)?),
        StableSource::IidPareto => {
            let g = cfg.stable.gamma.unwrap_or(cfg.gamma());
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidGamma(g));
            }
            Source::Pareto(g)
        }
        StableSource::Constant => {
            if cfg.stable.constant == 0 {
                return Err(Error::Config("stable.constant must be positive".into()));
            }
            Source::Constant(cfg.stable.constant)
        }
    })
}

fn scan_all(
    cfg: &ExperimentConfig,
    source: &Source,
    starts: &[f64],
    count: usize,
    grid: &[u64],
    keep_counts: usize,
    lil: Option<&LilScale>,
) -> Result<Vec<Scan>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let rng = stream(cfg.run.seed, tag::IID_CONTROL, i as u64);
            scan(source, starts[i], rng, grid, i < keep_counts, lil, cfg.run.return_cap)
        })
        .collect()
}

/// `a(t)` on dyadic times resolved by every tallying trajectory.
fn tallied_a(scans: &[Scan]) -> Result<ReturnSequence> {
    let kept: Vec<&Vec<u64>> = scans.iter().filter_map(|s| s.counts.as_ref()).collect();
    let len = kept.iter().map(|c| c.len()).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InsufficientData("too few resolved times for a return sequence".into()));
    }
    let times = time_grid();
    let ns: Vec<u64> = times[..len].iter().map(|&t| t as u64).collect();
    let values: Vec<f64> =
        (0..len).map(|j| kept.iter().map(|c| c[j] as f64).sum::<f64>() / kept.len() as f64).collect();
    ReturnSequence::new(ns, values, SequenceSource::FromReturnTimes)
}

/// Regular-variation fit over the upper half of the tallied times.
fn fit_upper(a: &ReturnSequence) -> Result<crate::asymptotics::RegVarFit> {
    let ns = a.ns();
    let lo = ns[ns.len() / 2].max(ns.iter().copied().find(|&n| a.value_at(n).unwrap_or(0.0) > 0.0).unwrap_or(1));
    fit_regvar(a, (lo, *ns.last().unwrap()))
}

fn merge_counters(table: &mut ResultTable, scans: &[Scan]) {
    for s in scans {
        table.counters.merge(&s.counters);
    }
}

/// Stable limit check for return-time sums.
pub fn run_stable(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let grid = cfg.grid();
    let n_traj = cfg.run.trajectories;
    let kind = cfg.stable.source;
    let g = match kind {
        StableSource::IidPareto => cfg.stable.gamma.unwrap_or(cfg.gamma()),
        _ => cfg.gamma(),
    };
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::InvalidGamma(g));
    }
    let source = make_source(cfg, kind)?;
    let mut table = ResultTable::new();
    let starts = match kind {
        StableSource::Induced => {
            let (s, c) = draw_starts(cfg, ExperimentKind::Stable)?;
            table.counters.merge(&c);
            s
        }
        _ => vec![0.0; n_traj],
    };
    let scans = scan_all(cfg, &source, &starts, n_traj, &grid, cfg.stable.scale_trajectories, None)?;
    merge_counters(&mut table, &scans);

    let z = PositiveStableDist::new(g)?;
    let z_med = z.median()?;
    let cdf_scaled = |x: f64| z.cdf(x * z_med).unwrap_or(f64::NAN);
    let calib = calibration_ks(cfg, n_traj, Normalize::Median, |r| z.sample(r), cdf_scaled)?;
    let threshold = cfg.run.calibration_factor * calib;
    let rule = if kind == StableSource::Constant { "STABLE-NEG" } else { "STABLE-KS" };
    let last = grid.len() - 1;

    let scale = tallied_a(&scans).and_then(|a| {
        let fit = fit_upper(&a)?;
        let ms: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
        asymptotic_inverse(&a, &ms, Some(&fit))
    });

    for (i, &n) in grid.iter().enumerate() {
        let phi: Vec<f64> = scans.iter().map(|s| s.sums[i]).collect();
        let censored = scans.iter().filter(|s| s.censored.is_some_and(|c| c <= i)).count();
        table.push("stable_censored", n, censored as f64, f64::NAN, Verdict::info("STABLE-CENSOR"));
        let ks = match normalized_sorted(&phi, Normalize::Median) {
            Some(sorted) => ks_distance(&sorted, cdf_scaled)?,
            None => f64::NAN,
        };
        let verdict = if i < last {
            Verdict::info(rule)
        } else if n_traj < 2 || ks.is_nan() {
            Verdict::insufficient(rule)
        } else if kind == StableSource::Constant {
            Verdict::check(ks >= threshold, rule)
        } else {
            Verdict::check(ks < threshold, rule)
        };
        table.push("stable_ks_scale_free", n, ks, threshold, verdict);

        match &scale {
            Ok(b) => {
                let bn = b[i].b;
                let mut x: Vec<f64> = phi.iter().map(|p| p / bn).collect();
                x.sort_by(|a, b| a.total_cmp(b));
                let ks_abs = ks_distance(&x, |v| z.cdf(v).unwrap_or(f64::NAN))?;
                table.push("stable_ks_absolute", n, ks_abs, f64::NAN, Verdict::info("STABLE-ABS"));
                let flag = if b[i].extrapolated { "STABLE-BEXTRAP" } else { "STABLE-B" };
                table.push("stable_b", n, bn, f64::NAN, Verdict::info(flag));
            }
            Err(_) => table.push("stable_ks_absolute", n, f64::NAN, f64::NAN, Verdict::info("STABLE-ABS")),
        }
    }
    table.push("stable_ks_calibration", grid[last], calib, cfg.run.calibration_factor, Verdict::info(rule));
    Ok(table)
}

/// One-sided LIL: running minima of `phi_n / (b(n/tau(n)) tau(n))`.
pub fn run_lil(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let grid = cfg.grid();
    let n_traj = cfg.run.trajectories;
    let g = cfg.gamma();
    let source = make_source(cfg, StableSource::Induced)?;
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Lil)?;
    table.counters.merge(&c);

    // Scale from a prefix of the trajectories, then the full scan.
    let keep = cfg.stable.scale_trajectories.min(n_traj).max(1);
    let prefix = scan_all(cfg, &source, &starts, keep, &grid, keep, None)?;
    let a = tallied_a(&prefix)?;
    let fit = fit_upper(&a)?;
    let a_max = *a.values().last().unwrap();
    let n_max = *grid.last().unwrap() as f64;
    let m_lo = 1.0f64;
    let steps = 400usize;
    let ms: Vec<f64> = (0..=steps).map(|k| m_lo * (n_max / m_lo).powf(k as f64 / steps as f64)).collect();
    let inv = asymptotic_inverse(&a, &ms, Some(&fit))?;
    let scale = LilScale {
        log_m: ms.iter().map(|m| m.ln()).collect(),
        log_b: inv.iter().map(|v| v.b.ln()).collect(),
        m_table: a_max,
        tau: cfg.lil.tau,
        tau_constant: cfg.lil.tau_constant,
    };
    let scans = scan_all(cfg, &source, &starts, n_traj, &grid, 0, Some(&scale))?;
    merge_counters(&mut table, &scans);

    let target = if g < 1.0 { lil_constants(g)?.c } else { 1.0 };
    let [lo, hi] = cfg.lil.band;
    let last = grid.len() - 1;
    for (i, &n) in grid.iter().enumerate() {
        let mins: Vec<f64> = scans.iter().map(|s| s.running_min[i]).filter(|v| v.is_finite()).collect();
        if mins.is_empty() {
            table.push("lil_running_min", n, f64::NAN, f64::NAN, Verdict::info("LIL-BAND"));
            continue;
        }
        let med = median(&mins);
        let (_, se_mean) = mean_se(&mins);
        let verdict = if i < last || cfg.lil.tau == TauRule::Constant {
            Verdict::info("LIL-BAND")
        } else if n_traj < 2 || n < 1_000_000 {
            Verdict::insufficient("LIL-BAND")
        } else {
            Verdict::check(med >= lo * target && med <= hi * target, "LIL-BAND")
        };
        // Median standard error under a normal approximation.
        table.push("lil_running_min", n, med, 1.2533 * se_mean, verdict);
        let arg = n as f64 / scale.tau(n as f64);
        let flag = if arg > scale.m_table { "LIL-BEXTRAP" } else { "LIL-B" };
        table.push("lil_b", n, scale.b(arg), f64::NAN, Verdict::info(flag));
    }
    let censored = scans.iter().filter(|s| s.censored.is_some()).count();
    table.push("lil_censored", grid[last], censored as f64, f64::NAN, Verdict::info("LIL-CENSOR"));
    table.push("lil_target", grid[last], target, f64::NAN, Verdict::info("LIL-BAND"));
    Ok(table)
}

/// Number of pairs `1 <= j, n <= n_max` violating
/// `S_n <= j  <=>  phi_j >= n`, given visit times (with a visit at 0) and
/// the partial sums `phi_1 < phi_2 < ...`.
pub fn duality_violations(visits: &[u64], partial_sums: &[u64], n_max: u64) -> u64 {
    let clip = n_max + 1;
    let mut violations = 0;
    let mut vi = 0usize;
    let mut j_star = 0usize;
    for n in 1..=n_max {
        while vi < visits.len() && visits[vi] < n {
            vi += 1;
        }
        // LHS holds exactly for j >= max(S_n, 1).
        let lhs = (vi as u64).max(1).min(clip);
        // RHS holds exactly for j >= first index with phi_j >= n.
        while j_star < partial_sums.len() && partial_sums[j_star] < n {
            j_star += 1;
        }
        let rhs = if j_star < partial_sums.len() { (j_star as u64 + 1).min(clip) } else { clip };
        violations += lhs.abs_diff(rhs);
    }
    violations
}

/// Exact check of the duality between occupation times and return-time sums.
pub fn check_duality(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let omega = cfg.set_interval()?;
    let w = cfg.initial_window()?;
    if w.lo < omega.lo || w.hi > omega.hi {
        return Err(Error::Config("duality starts must lie in the inducing set".into()));
    }
    let n_max = cfg.run.grid_max;
    let induced = InducedSystem::new(system.clone(), omega, cfg.run.return_cap)?.with_acceleration(false);
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Duality)?;
    table.counters.merge(&c);
    let per: Vec<(u64, bool, Counters)> = starts
        .par_iter()
        .map(|&x0| {
            let (visits, mut counters) = visit_times(&system, x0, omega, n_max, false)?;
            let mut sums = Vec::new();
            let (mut x, mut total) = (x0, 0u64);
            while total < n_max {
                match induced.next_return(x, &mut counters) {
                    Ok((t, z)) => {
                        total += t;
                        x = z;
                        sums.push(total);
                    }
                    Err(Error::ReturnCapExceeded { .. }) => return Ok((0, true, counters)),
                    Err(e) => return Err(e),
                }
            }
            Ok((duality_violations(&visits, &sums, n_max), false, counters))
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut censored = 0;
    for (v, cens, c) in per {
        violations += v;
        censored += usize::from(cens);
        table.counters.merge(&c);
    }
    let verdict = if censored > 0 { Verdict::insufficient("DUAL-EXACT") } else { Verdict::check(violations == 0, "DUAL-EXACT") };
    table.push("duality_violations", n_max, violations as f64, 0.0, verdict);
    let pairs = (starts.len() - censored) as f64 * (n_max as f64).powi(2);
    table.push("duality_pairs", n_max, pairs, f64::NAN, Verdict::info("DUAL-EXACT"));
    Ok(table)
}

/// Asymptotic renewal equation `c(lambda) u(lambda) -> 1` with `m(omega) = 1`.
pub fn run_renewal(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let omega = cfg.set_interval()?;
    let horizon = cfg.run.grid_max;
    let induced = InducedSystem::new(system.clone(), omega, cfg.run.return_cap)?;
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Renewal)?;
    table.counters.merge(&c);
    let first: Vec<(u64, Counters)> = starts
        .par_iter()
        .map(|&x| {
            let mut counters = Counters::default();
            match induced.next_return(x, &mut counters) {
                Ok((t, _)) => Ok((t, counters)),
                // A capped return counts as the cap: 1 - e^{-lambda cap} is 1 to double precision.
                Err(Error::ReturnCapExceeded { cap }) => Ok((cap, counters)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let samples: Vec<u64> = first
        .into_iter()
        .map(|(t, c)| {
            table.counters.merge(&c);
            t
        })
        .collect();
    let a = correlation_a(&system, omega, 1.0, &starts, horizon, true)?;

    let [w_lo, w_hi] = cfg.renewal.window;
    for &l in &cfg.renewal.lambdas {
        let code = (1.0 / l).round() as u64;
        let in_window = l >= w_lo * (1.0 - 1e-12) && l <= w_hi * (1.0 + 1e-12);
        match renewal_residual(&a, &samples, l) {
            Ok(row) => {
                let terms: Vec<f64> = samples.iter().map(|&t| -(-l * t as f64).exp_m1()).collect();
                let (_, se_c) = mean_se(&terms);
                let verdict = if in_window {
                    Verdict::check(row.residual_with_origin.abs() < cfg.renewal.tol, "RENEWAL-RES")
                } else {
                    Verdict::info("RENEWAL-RES")
                };
                table.push("renewal_residual", code, row.residual_with_origin, se_c * row.u_with_origin, verdict);
                table.push("renewal_c", code, row.c, se_c, Verdict::info("RENEWAL-RES"));
                table.push("renewal_u", code, row.u_with_origin, f64::NAN, Verdict::info("RENEWAL-RES"));
            }
            Err(Error::TruncationTooCoarse { .. }) => {
                let verdict = if in_window { Verdict::insufficient("RENEWAL-RES") } else { Verdict::info("RENEWAL-TRUNC") };
                table.push("renewal_residual", code, f64::NAN, f64::NAN, verdict);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_duality() {
        // Return times (2, 3, 2) from a start in the set.
        let visits = [0, 2, 5, 7];
        let sums = [2, 5, 7];
        assert_eq!(duality_violations(&visits, &sums, 7), 0);
        assert_eq!(duality_violations(&visits, &sums, 1), 0);
        // A wrong visit log is caught.
        assert!(duality_violations(&[0, 3, 5, 7], &sums, 7) > 0);
    }

    #[test]
    fn pareto_tail() {
        let src = Source::Pareto(0.5);
        let mut w = Walker { source: &src, x: 0.0, rng: stream(3, tag::IID_CONTROL, 0) };
        let mut c = Counters::default();
        let n = 200_000;
        let big = (0..n).filter(|_| w.next(&mut c).unwrap().unwrap() >= 100.0).count();
        let p = big as f64 / n as f64;
        assert!((p - 0.1).abs() < 4.0 * (0.09f64 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn tallies_of_unit_returns() {
        let src = Source::Constant(1);
        let s = scan(&src, 0.0, stream(1, 1, 0), &[4, 8, 16], true, None, 100).unwrap();
        assert_eq!(s.sums, vec![4.0, 8.0, 16.0]);
        // #{k : k <= t} for t = 1, 2, 4, 8.
        assert_eq!(s.counts, Some(vec![1, 2, 4, 8]));
    }
}
