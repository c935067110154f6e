//! Runners built on occupation times `S_n(1_A)` of the base map.

use rayon::prelude::*;

use super::{
    calibration_ks, draw_starts, last_decade, normalized_sorted, ExperimentConfig, ExperimentKind, Normalize,
    ResultTable, Verdict,
};
use crate::asymptotics::{correlation_a, laplace_u};
use crate::error::{Error, Result};
use crate::limit_laws::{ks_distance, ml_moment, MittagLefflerDist};
use crate::maps::{occupation_path, visit_times, Counters, Interval, IntervalMapSystem};
use crate::numeric::{mean_se, median};

/// `S_n` at every grid point for every start.
fn occupation_paths(
    system: &IntervalMapSystem,
    set: Interval,
    starts: &[f64],
    grid: &[u64],
    counters: &mut Counters,
) -> Result<Vec<Vec<u64>>> {
    let out: Vec<(Vec<u64>, Counters)> =
        starts.par_iter().map(|&x| occupation_path(system, x, set, grid, true)).collect::<Result<_>>()?;
    Ok(out
        .into_iter()
        .map(|(p, c)| {
            counters.merge(&c);
            p
        })
        .collect())
}

fn column(paths: &[Vec<u64>], i: usize) -> Vec<f64> {
    paths.iter().map(|p| p[i] as f64).collect()
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt() / mean
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let set = cfg.set_interval()?;
    let grid = cfg.grid();
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Simulate)?;
    table.counters.merge(&c);
    let paths = occupation_paths(&system, set, &starts, &grid, &mut table.counters)?;
    for (i, &n) in grid.iter().enumerate() {
        let s = column(&paths, i);
        let (mean, se) = mean_se(&s);
        table.push("occupation_mean", n, mean, se, Verdict::info("SIM-INFO"));
        table.push("occupation_cv", n, coefficient_of_variation(&s), f64::NAN, Verdict::info("SIM-INFO"));
    }
    Ok(table)
}

/// Darling-Kac check: `S_n / mean(S_n)` against the unit-mean
/// Mittag-Leffler law, or shrinking spread when the limit is degenerate.
pub fn run_dk(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let set = cfg.set_interval()?;
    let grid = cfg.grid();
    let g = cfg.gamma();
    let n_traj = cfg.run.trajectories;
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Dk)?;
    table.counters.merge(&c);
    let paths = occupation_paths(&system, set, &starts, &grid, &mut table.counters)?;
    let last = grid.len() - 1;

    let cv: Vec<f64> = (0..grid.len()).map(|i| coefficient_of_variation(&column(&paths, i))).collect();
    for (i, &n) in grid.iter().enumerate() {
        let verdict = if g < 1.0 || i < last {
            Verdict::info("DK-CV")
        } else if grid.len() < 3 || n_traj < 2 {
            Verdict::insufficient("DK-CV")
        } else {
            Verdict::check(cv[last - 2] > cv[last - 1] && cv[last - 1] > cv[last], "DK-CV")
        };
        table.push("dk_cv", n, cv[i], f64::NAN, verdict);
    }
    if g >= 1.0 {
        return Ok(table);
    }

    let ml = MittagLefflerDist::new(g)?;
    let cdf = |y: f64| ml.cdf(y).unwrap_or(f64::NAN);
    let calib = calibration_ks(cfg, n_traj, Normalize::Mean, |r| ml.sample(r), cdf)?;
    let threshold = cfg.run.calibration_factor * calib;
    for (i, &n) in grid.iter().enumerate() {
        let Some(sorted) = normalized_sorted(&column(&paths, i), Normalize::Mean) else {
            table.push("dk_ks", n, f64::NAN, threshold, Verdict::insufficient("DK-KS"));
            continue;
        };
        let ks = ks_distance(&sorted, cdf)?;
        let verdict = if i < last {
            Verdict::info("DK-KS")
        } else if n_traj < 2 {
            Verdict::insufficient("DK-KS")
        } else {
            Verdict::check(ks < threshold, "DK-KS")
        };
        table.push("dk_ks", n, ks, threshold, verdict);
    }
    table.push("dk_ks_calibration", grid[last], calib, cfg.run.calibration_factor, Verdict::info("DK-KS"));
    Ok(table)
}

/// `mean(S_n^2) / mean(S_n)^2` with a delta-method standard error.
fn moment_ratio(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let m1 = s.iter().sum::<f64>() / n;
    let m2 = s.iter().map(|x| x * x).sum::<f64>() / n;
    let ratio = m2 / (m1 * m1);
    if s.len() < 2 {
        return (ratio, f64::NAN);
    }
    let infl: Vec<f64> = s.iter().map(|x| (x * x - m2) / (m1 * m1) - 2.0 * m2 * (x - m1) / (m1 * m1 * m1)).collect();
    let var = infl.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
    (ratio, (var / n).sqrt())
}

/// Rényi-inequality check on `m_A`-distributed starts.
pub fn run_renyi(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let set = cfg.set_interval()?;
    let grid = cfg.grid();
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Renyi)?;
    table.counters.merge(&c);
    let paths = occupation_paths(&system, set, &starts, &grid, &mut table.counters)?;

    let target = ml_moment(cfg.gamma(), 2);
    let band = cfg.renyi.band.unwrap_or([0.86 * target, 1.15 * target]);
    let decade = last_decade(&grid);
    let enough = cfg.run.trajectories >= 2;
    let mut ratios = Vec::with_capacity(grid.len());
    for (i, &n) in grid.iter().enumerate() {
        let (r, se) = moment_ratio(&column(&paths, i));
        ratios.push(r);
        let verdict = if !decade.contains(&i) {
            Verdict::info("RENYI-TARGET")
        } else if !enough || !r.is_finite() {
            Verdict::insufficient("RENYI-TARGET")
        } else {
            Verdict::check(r >= band[0] && r <= band[1], "RENYI-TARGET")
        };
        table.push("renyi_ratio", n, r, se, verdict);
    }
    let tail = &ratios[decade];
    let sup = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let med = median(tail);
    let verdict = if enough && sup.is_finite() {
        Verdict::check(sup <= 1.5 * med, "RENYI-BOUNDED")
    } else {
        Verdict::insufficient("RENYI-BOUNDED")
    };
    table.push("renyi_sup", *grid.last().unwrap(), sup, 1.5 * med, verdict);
    table.push("renyi_target", *grid.last().unwrap(), target, band[1] - band[0], Verdict::info("RENYI-TARGET"));
    Ok(table)
}

/// `sum_{n=a}^{b} e^{-lambda n}` without cancellation.
fn geometric(lambda: f64, a: u64, b: u64) -> f64 {
    if b < a {
        return 0.0;
    }
    let len = (b - a + 1) as f64;
    (-lambda * a as f64).exp() * (-(-lambda * len).exp_m1()) / (-(-lambda).exp_m1())
}

/// `sum_{n=1}^{horizon} e^{-lambda n} S_n^p` for one orbit with visit
/// times `visits` (`S_n` counts visits at times `< n`).
fn laplace_occupation(visits: &[u64], horizon: u64, lambda: f64, p: u32) -> f64 {
    let mut total = 0.0;
    let mut from = 1u64;
    let mut count = 0u64;
    for &t in visits {
        // S_n = count for n in [from, t].
        total += (count as f64).powi(p as i32) * geometric(lambda, from, t.min(horizon));
        count += 1;
        from = t + 1;
    }
    total + (count as f64).powi(p as i32) * geometric(lambda, from, horizon)
}

fn factorial(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

/// Moment-set check: `sum e^{-lambda n} E_A S_n^p` against
/// `p! u(lambda)^p / lambda`, with `m` normalised so that `m(A) = 1`.
pub fn run_moments(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let set = cfg.set_interval()?;
    let horizon = cfg.run.grid_max;
    let mut table = ResultTable::new();
    let (starts, c) = draw_starts(cfg, ExperimentKind::Moments)?;
    table.counters.merge(&c);
    let visits: Vec<Vec<u64>> = starts
        .par_iter()
        .map(|&x| visit_times(&system, x, set, horizon + 1, true).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    let a = correlation_a(&system, set, 1.0, &starts, horizon, true)?;

    let mut lambdas = cfg.moments.lambdas.clone();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let code = |l: f64| (1.0 / l).round() as u64;
    // Feasible: inside the asymptotic regime and resolved by the horizon.
    let mut feasible = Vec::new();
    let mut u_tilde = Vec::new();
    for &l in &lambdas {
        if !(l > 0.0 && l < 1.0) {
            table.push("moment_lambda", code(l.max(1e-300)), l, f64::NAN, Verdict::info("MOM-REGIME"));
            u_tilde.push(f64::NAN);
            continue;
        }
        match laplace_u(&a, l) {
            Ok(u) if l * horizon as f64 >= 40.0 => {
                feasible.push(l);
                u_tilde.push(1.0 + (-l).exp() * u);
            }
            Ok(_) | Err(Error::TruncationTooCoarse { .. }) => {
                table.push("moment_lambda", code(l), l, f64::NAN, Verdict::info("MOM-TRUNC"));
                u_tilde.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    let judged: Vec<f64> = feasible.iter().rev().take(2).cloned().collect();
    for p in 0..=cfg.moments.p_max {
        let name = format!("moment_ratio_p{p}");
        for (li, &l) in lambdas.iter().enumerate() {
            if !feasible.contains(&l) {
                continue;
            }
            let sums: Vec<f64> = visits.iter().map(|v| laplace_occupation(v, horizon, l, p)).collect();
            let (lhs, se) = mean_se(&sums);
            let rhs = factorial(p) * u_tilde[li].powi(p as i32) / l;
            let ratio = lhs / rhs;
            let verdict = if (p == 1 || p == 2) && judged.contains(&l) {
                let [lo, hi] = cfg.moments.band;
                Verdict::check(ratio >= lo && ratio <= hi, "MOM-RATIO")
            } else {
                Verdict::info("MOM-RATIO")
            };
            table.push(&name, code(l), ratio, se / rhs, verdict);
        }
        if (p == 1 || p == 2) && judged.len() < 2 {
            table.push(&name, 0, f64::NAN, f64::NAN, Verdict::insufficient("MOM-RATIO"));
        }
    }
    for (li, &l) in lambdas.iter().enumerate() {
        if feasible.contains(&l) {
            table.push("moment_u", code(l), u_tilde[li], f64::NAN, Verdict::info("MOM-RATIO"));
        }
    }
    Ok(table)
}
