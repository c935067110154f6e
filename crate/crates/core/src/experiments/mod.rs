//! Monte Carlo experiment drivers, exact structural checks and their
//! configuration and output.
//!
//! Every runner takes an [`ExperimentConfig`] and returns a [`ResultTable`];
//! each row carries a verdict naming the rule it was judged by. Trajectory
//! `i` always draws from the stream `(seed, tag, i)`, and per-trajectory
//! results are merged in index order, so tables do not depend on the number
//! of worker threads.

mod config;
mod occupation;
mod returns;
mod structural;
mod table;

use std::str::FromStr;

use rayon::prelude::*;

pub use config::{
    ExperimentConfig, InitialConfig, InitialLaw, LilConfig, MapConfig, MapFamily, MixingConfig, MomentsConfig,
    RenewalConfig, RenyiConfig, RunConfig, ScaleRule, StableConfig, StableSource, TailConfig, TauRule, UlamConfig,
    Window, WpdeConfig,
};
pub use occupation::{run_dk, run_renyi, run_moments, run_simulate};
pub use returns::{check_duality, duality_violations, run_lil, run_renewal, run_stable};
pub use structural::{run_mixing, run_tail, run_ulam, run_wpde};
pub use table::{Outcome, ResultTable, Row, RunMetadata, Verdict};

use crate::error::{Error, Result};
use crate::limit_laws::ks_distance;
use crate::maps::{Counters, InducedSystem, Interval};
use crate::numeric::median;
use crate::rng::{open01, stream, tag, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Simulate,
    Dk,
    Stable,
    Lil,
    Duality,
    Renyi,
    Moments,
    Wpde,
    Renewal,
    Mixing,
    Ulam,
    Tail,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Simulate,
        ExperimentKind::Dk,
        ExperimentKind::Stable,
        ExperimentKind::Lil,
        ExperimentKind::Duality,
        ExperimentKind::Renyi,
        ExperimentKind::Moments,
        ExperimentKind::Wpde,
        ExperimentKind::Renewal,
        ExperimentKind::Mixing,
        ExperimentKind::Ulam,
        ExperimentKind::Tail,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Dk => "dk",
            ExperimentKind::Stable => "stable",
            ExperimentKind::Lil => "lil",
            ExperimentKind::Duality => "duality",
            ExperimentKind::Renyi => "renyi",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Wpde => "wpde",
            ExperimentKind::Renewal => "renewal",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::Ulam => "ulam",
            ExperimentKind::Tail => "tail",
        }
    }

    /// Start law used when the config does not name one.
    fn default_law(&self) -> InitialLaw {
        match self {
            ExperimentKind::Renyi | ExperimentKind::Moments | ExperimentKind::Renewal | ExperimentKind::Stable => {
                InitialLaw::Invariant
            }
            _ => InitialLaw::Uniform,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Run one experiment on the current rayon pool.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    match kind {
        ExperimentKind::Simulate => run_simulate(cfg),
        ExperimentKind::Dk => run_dk(cfg),
        ExperimentKind::Stable => run_stable(cfg),
        ExperimentKind::Lil => run_lil(cfg),
        ExperimentKind::Duality => check_duality(cfg),
        ExperimentKind::Renyi => run_renyi(cfg),
        ExperimentKind::Moments => run_moments(cfg),
        ExperimentKind::Wpde => run_wpde(cfg),
        ExperimentKind::Renewal => run_renewal(cfg),
        ExperimentKind::Mixing => run_mixing(cfg),
        ExperimentKind::Ulam => run_ulam(cfg),
        ExperimentKind::Tail => run_tail(cfg),
    }
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_with_threads(kind: ExperimentKind, cfg: &ExperimentConfig, threads: usize) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run(kind, cfg))
}

pub fn metadata(kind: ExperimentKind, cfg: &ExperimentConfig, table: &ResultTable) -> RunMetadata {
    RunMetadata {
        command: kind.as_str().to_string(),
        map: cfg.system().map(|s| s.name()).unwrap_or_default(),
        seed: cfg.run.seed,
        config_digest: cfg.digest(),
        trajectories: cfg.run.trajectories,
        boundary_hits: table.counters.boundary_hits,
        return_cap_hits: table.counters.return_cap_hits,
        verdicts: table.verdict_counts(),
    }
}

/// Starting points of the `N` trajectories.
///
/// Invariant-law starts are uniform in the set and then moved by `burn_in`
/// first returns; a start whose burn-in hits the return cap is redrawn from
/// the same stream.
pub(crate) fn draw_starts(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(Vec<f64>, Counters)> {
    let law = cfg.initial.law.unwrap_or(kind.default_law());
    let system = cfg.system()?;
    let window = match law {
        InitialLaw::Uniform => cfg.initial_window()?,
        InitialLaw::Invariant => cfg.set_interval()?,
    };
    let induced = match law {
        InitialLaw::Invariant => Some(InducedSystem::new(system, cfg.set_interval()?, cfg.run.return_cap)?),
        InitialLaw::Uniform => None,
    };
    let burn_in = cfg.run.burn_in;
    let out: Vec<(f64, Counters)> = (0..cfg.run.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.run.seed, tag::ORBIT_STARTS, i as u64);
            let mut counters = Counters::default();
            loop {
                let x = uniform_in(&mut rng, window);
                let Some(ind) = &induced else { return Ok((x, counters)) };
                match burn(ind, x, burn_in, &mut counters) {
                    Ok(z) => return Ok((z, counters)),
                    Err(Error::ReturnCapExceeded { .. }) if counters.return_cap_hits < 64 => continue,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut counters = Counters::default();
    let starts = out
        .into_iter()
        .map(|(x, c)| {
            counters.merge(&c);
            x
        })
        .collect();
    Ok((starts, counters))
}

fn burn(ind: &InducedSystem, mut x: f64, steps: usize, counters: &mut Counters) -> Result<f64> {
    for _ in 0..steps {
        x = ind.next_return(x, counters)?.1;
    }
    Ok(x)
}

pub(crate) fn uniform_in(rng: &mut Stream, w: Interval) -> f64 {
    let x = w.lo + (w.hi - w.lo) * open01(rng);
    x.clamp(w.lo, w.hi)
}

/// How a calibration sample is made scale free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Normalize {
    Mean,
    Median,
}

pub(crate) fn normalized_sorted(values: &[f64], how: Normalize) -> Option<Vec<f64>> {
    let scale = match how {
        Normalize::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Normalize::Median => median(values),
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x / scale).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    Some(v)
}

/// Median KS distance of `replicates` same-size samples from the exact
/// target sampler, normalised the same way as the data.
pub(crate) fn calibration_ks<S, F>(cfg: &ExperimentConfig, n: usize, how: Normalize, sample: S, cdf: F) -> Result<f64>
where
    S: Fn(&mut Stream) -> f64 + Sync,
    F: Fn(f64) -> f64 + Sync,
{
    let ks: Vec<f64> = (0..cfg.run.calibration_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.run.seed, tag::CALIBRATION, r as u64);
            let xs: Vec<f64> = (0..n).map(|_| sample(&mut rng)).collect();
            let sorted = normalized_sorted(&xs, how)
                .ok_or_else(|| Error::InsufficientData("calibration sample has no positive scale".into()))?;
            ks_distance(&sorted, &cdf)
        })
        .collect::<Result<_>>()?;
    Ok(median(&ks))
}

/// Grid points in the last decade `[n_max / 10, n_max]`.
pub(crate) fn last_decade(grid: &[u64]) -> std::ops::Range<usize> {
    let n_max = *grid.last().unwrap_or(&0);
    let start = grid.partition_point(|&n| n * 10 < n_max);
    start..grid.len()
}
