//! Deterministic and transfer-operator based runners.

use super::{ExperimentConfig, MapFamily, ResultTable, ScaleRule, Verdict};
use crate::asymptotics::{neutral_tail, ReturnSequence};
use crate::error::{Error, Result};
use crate::maps::Interval;
use crate::mixing::{
    fit_exponential_decay, test_intervals, CoefficientKind, CylinderFamily, FibredSystem, JointCounts, MonteCarlo,
};
use crate::numeric::{dyadic_grid, integrate};
use crate::transfer::{build_ulam, dual_ergodic_avg, invariant_density_ulam};

/// Maps whose reference density is invariant in closed form.
fn invariant_reference(cfg: &ExperimentConfig) -> bool {
    !matches!(cfg.map.family, MapFamily::Thaler)
}

fn analytic_scale(rule: ScaleRule, c: f64, g: f64) -> impl Fn(u64) -> f64 {
    move |n| {
        let x = n as f64;
        match rule {
            ScaleRule::Linear => c * x,
            ScaleRule::NOverLog => c * x / x.ln().max(1.0),
            ScaleRule::Power => c * x.powf(g),
        }
    }
}

/// Dual ergodic averages of `1_A` for the invariant measure, compared
/// with `m(A)`, and the optimised envelope `p/a_n + 1 + n tau(p)/a_n`.
pub fn run_wpde(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if !invariant_reference(cfg) {
        return Err(Error::Config("wpde needs a map with a closed-form invariant density".into()));
    }
    let system = cfg.system()?;
    let set = cfg.set_interval()?;
    let w = &cfg.wpde;
    let n = cfg.run.grid_max;
    let rule = w.a_seq.unwrap_or(match cfg.map.family {
        MapFamily::BooleLike => ScaleRule::NOverLog,
        MapFamily::Thaler => ScaleRule::Power,
        _ => ScaleRule::Linear,
    });
    let a_fn = analytic_scale(rule, w.a_const, cfg.gamma());
    let a_seq = ReturnSequence::analytic(&a_fn, n);
    let mass = integrate(|x| system.ref_density(x), set.lo, set.hi, 1e-12).0;
    if w.points == 0 || !(w.lo < w.hi) {
        return Err(Error::Config("wpde needs at least one point in a nonempty range".into()));
    }
    let pts: Vec<f64> = (0..w.points).map(|i| w.lo + (i as f64 + 0.5) * (w.hi - w.lo) / w.points as f64).collect();
    let s = system.clone();
    // Transfer of h 1_A divided by h is the transfer operator of m.
    let f = move |x: f64| if set.contains(x) { s.ref_density(x) } else { 0.0 };
    let avgs = dual_ergodic_avg(&system, &f, n, &a_seq, &pts)?;
    let h: Vec<f64> = pts.iter().map(|&x| system.ref_density(x)).collect();
    let last = avgs.len() - 1;
    let mut table = ResultTable::new();
    for (k, avg) in avgs.iter().enumerate() {
        let spread = avg.values.iter().zip(&h).map(|(v, hx)| (v / hx / mass - 1.0).abs()).fold(0.0, f64::max);
        let verdict = if k < last { Verdict::info("WPDE-SPREAD") } else { Verdict::check(spread <= w.tol, "WPDE-SPREAD") };
        table.push("wpde_spread", avg.n, spread, w.tol, verdict);
        let (env, p) = envelope(avg.n, avg.a_n, w.tau_rate);
        table.push("wpde_envelope", avg.n, env, p as f64, Verdict::info("WPDE-ENVELOPE"));
    }
    for (i, (v, hx)) in avgs[last].values.iter().zip(&h).enumerate() {
        table.push("wpde_points", i as u64, v / hx, pts[i], Verdict::info("WPDE-SPREAD"));
    }
    table.push("wpde_mass", n, mass, f64::NAN, Verdict::info("WPDE-SPREAD"));
    Ok(table)
}

/// `min_p p/a_n + 1 + n e^{-rate p}/a_n` and its minimiser.
fn envelope(n: u64, a_n: f64, rate: f64) -> (f64, u64) {
    let mut best = (f64::INFINITY, 1);
    for p in 1..=n {
        let v = p as f64 / a_n + 1.0 + n as f64 * (-rate * p as f64).exp() / a_n;
        if v < best.0 {
            best = (v, p);
        }
        if p as f64 / a_n > best.0 {
            break;
        }
    }
    best
}

fn fibred(cfg: &ExperimentConfig) -> Result<FibredSystem> {
    match cfg.map.family {
        MapFamily::Doubling => Ok(FibredSystem::doubling()),
        MapFamily::BooleLike => Ok(FibredSystem::boole_induced()),
        other => Err(Error::Config(format!("no fibred system with a known stationary law for {other:?}"))),
    }
}

/// Mixing-coefficient lower bounds over the declared families.
pub fn run_mixing(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let fs = fibred(cfg)?;
    let m = &cfg.mixing;
    let family = CylinderFamily::enumerate(&fs, m.max_len, m.min_prob)?;
    let tests = test_intervals(fs.domain(), m.tests);
    let n_grid = dyadic_grid(1, m.n_max.max(1));
    let mc = MonteCarlo { samples: m.samples, seed: cfg.run.seed };
    let counts = JointCounts::collect(&fs, &n_grid, &family, &tests, &mc)?;
    let unit = |_: f64| 1.0;
    let psi = counts.estimate(&fs, CoefficientKind::Psi, None);
    let psi_star = counts.estimate(&fs, CoefficientKind::PsiStar, None);
    let phi = counts.estimate(&fs, CoefficientKind::PhiMinus, None);
    let theta = counts.estimate(&fs, CoefficientKind::ThetaMu, Some(&unit));
    let independent = cfg.map.family == MapFamily::Doubling;
    let mut table = ResultTable::new();
    table.counters = counts.counters;
    for (i, &n) in n_grid.iter().enumerate() {
        let within = |v: f64, target: f64, se: f64| (v - target).abs() <= 3.0 * se;
        let judge = |ok: bool, rule| if independent { Verdict::check(ok, rule) } else { Verdict::info(rule) };
        table.push("mixing_psi", n, psi.values[i], psi.se[i], judge(within(psi.values[i], 0.0, psi.se[i]), "MIX-PSI"));
        table.push(
            "mixing_psi_star",
            n,
            psi_star.values[i],
            psi_star.se[i],
            judge(within(psi_star.values[i], 1.0, psi_star.se[i]), "MIX-PSISTAR"),
        );
        table.push("mixing_phi_minus", n, phi.values[i], phi.se[i], judge(within(phi.values[i], 0.0, phi.se[i]), "MIX-PHI"));
        let budget = 3.0 * phi.se[i].hypot(psi_star.se[i]);
        let order = phi.values[i] <= psi_star.values[i] - 1.0 + budget;
        table.push("mixing_order", n, phi.values[i] - (psi_star.values[i] - 1.0), budget, Verdict::check(order, "MIX-ORDER"));
        let identical = theta.cells[i].iter().zip(&phi.cells[i]).all(|(a, b)| a.to_bits() == b.to_bits());
        table.push("mixing_theta_mu", n, theta.values[i], theta.se[i], Verdict::check(identical, "MIX-THETA"));
    }
    if let Ok((c, rate)) = fit_exponential_decay(&n_grid, &phi.values) {
        table.push("mixing_phi_decay", *n_grid.last().unwrap(), rate, c, Verdict::info("MIX-DECAY"));
    }
    table.push("mixing_family", family.len() as u64, (family.len() * tests.len()) as f64, f64::NAN, Verdict::info("MIX-FAMILY"));
    Ok(table)
}

/// Ulam approximation of the invariant density, compared with the
/// closed-form density where one exists.
pub fn run_ulam(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let u = &cfg.ulam;
    let boole = cfg.map.family == MapFamily::BooleLike;
    let domain = system.domain();
    let window: Interval = u.window.map(Into::into).unwrap_or(if boole { Interval { lo: 0.05, hi: 1.0 } } else { domain });
    let ref_set: Interval = u.ref_set.map(Into::into).unwrap_or(if boole { Interval { lo: 0.5, hi: 1.0 } } else { window });
    let ref_mass = u.ref_mass.unwrap_or_else(|| integrate(|x| system.ref_density(x), ref_set.lo, ref_set.hi, 1e-13).0);
    let compare: Interval = u.compare.map(Into::into).unwrap_or(if boole { Interval { lo: 0.1, hi: 0.9 } } else { window });
    let op = build_ulam(&system, u.cells, window)?;
    let dens = invariant_density_ulam(&op, ref_set, ref_mass)?;
    let mut table = ResultTable::new();
    let closed = invariant_reference(cfg);
    let mut worst: f64 = 0.0;
    for (k, w) in dens.edges.windows(2).enumerate() {
        let reference = if closed {
            integrate(|x| system.ref_density(x), w[0], w[1], 1e-13).0 / (w[1] - w[0])
        } else {
            f64::NAN
        };
        if closed && w[0] >= compare.lo && w[1] <= compare.hi {
            worst = worst.max((dens.values[k] / reference - 1.0).abs());
        }
        table.push("ulam_density", k as u64, dens.values[k], reference, Verdict::info("ULAM-REF"));
    }
    let verdict = if closed { Verdict::check(worst < u.tol, "ULAM-REF") } else { Verdict::info("ULAM-REF") };
    table.push("ulam_sup_rel_error", u.cells as u64, if closed { worst } else { f64::NAN }, u.tol, verdict);
    table.push("ulam_iterations", u.cells as u64, dens.iterations as f64, f64::NAN, Verdict::info("ULAM-REF"));
    let leak: f64 = op.leakage().iter().sum();
    table.push("ulam_leakage", u.cells as u64, leak, f64::NAN, Verdict::info("ULAM-REF"));
    if u.export_matrix {
        let mut buf = Vec::new();
        op.write_csv(&mut buf)?;
        table.exports.push(("ulam_matrix.csv".into(), buf));
    }
    Ok(table)
}

/// Decay of the neutral-branch preimages `q_n`.
pub fn run_tail(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let system = cfg.system()?;
    let np = system.neutral_point().ok_or_else(|| Error::Config("tail needs a map with an indifferent fixed point".into()))?;
    let t = &cfg.tail;
    let tail = neutral_tail(&system, t.n_max)?;
    let mut table = ResultTable::new();
    let last = t.n_max as u64;
    let mut grid = dyadic_grid(1, last);
    if grid.last() != Some(&last) {
        grid.push(last);
    }
    for &n in &grid {
        let verdict = if n < last {
            Verdict::info("TAIL-CONST")
        } else {
            Verdict::check((tail.scaled_last - 1.0).abs() <= t.const_tol, "TAIL-CONST")
        };
        table.push("tail_scaled", n, tail.scaled(n as usize, np.gamma, np.kappa), t.const_tol, verdict);
        table.push("tail_q", n, tail.q[n as usize - 1], f64::NAN, Verdict::info("TAIL-Q"));
    }
    table.push("tail_slope", last, tail.slope, t.slope_tol, Verdict::check((tail.slope + np.gamma).abs() <= t.slope_tol, "TAIL-SLOPE"));
    Ok(table)
}
