use crate::error::{Error, Result};
use crate::maps::{visit_times, Interval, IntervalMapSystem};
use crate::numeric::{dyadic_grid, least_squares};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceSource {
    FromReturnTimes,
    FromCorrelations,
    Analytic,
}

/// A nondecreasing sequence `a(n)` sampled at increasing `n >= 1`, with the
/// convention `a(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSequence {
    ns: Vec<u64>,
    values: Vec<f64>,
    source: SequenceSource,
}

impl ReturnSequence {
    pub fn new(ns: Vec<u64>, values: Vec<f64>, source: SequenceSource) -> Result<Self> {
        if ns.len() != values.len() {
            return Err(Error::InvalidArgument("grid and values differ in length".into()));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) || ns.first() == Some(&0) {
            return Err(Error::InvalidArgument("grid must be increasing and start at n >= 1".into()));
        }
        Ok(Self { ns, values, source })
    }

    /// `a(n) = f(n)` for `n = 1..=n_max`.
    pub fn analytic<F: Fn(u64) -> f64>(f: F, n_max: u64) -> Self {
        let ns: Vec<u64> = (1..=n_max).collect();
        let values = ns.iter().map(|&n| f(n)).collect();
        Self { ns, values, source: SequenceSource::Analytic }
    }

    pub fn ns(&self) -> &[u64] {
        &self.ns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> SequenceSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ns.is_empty()
    }

    pub fn n_max(&self) -> u64 {
        self.ns.last().copied().unwrap_or(0)
    }

    /// True when every `n` from 1 to `n_max` is present.
    pub fn is_full_resolution(&self) -> bool {
        self.ns.last().map_or(true, |&last| last as usize == self.ns.len())
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// `a(n)`, interpolated linearly between grid points; `None` off the grid range.
    pub fn value_at(&self, n: u64) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        match self.ns.binary_search(&n) {
            Ok(i) => Some(self.values[i]),
            Err(0) => None,
            Err(i) if i >= self.ns.len() => None,
            Err(i) => {
                let (n0, n1) = (self.ns[i - 1] as f64, self.ns[i] as f64);
                let t = (n as f64 - n0) / (n1 - n0);
                Some(self.values[i - 1] + t * (self.values[i] - self.values[i - 1]))
            }
        }
    }

    /// Restriction to the given grid points (those within range).
    pub fn on_grid(&self, grid: &[u64]) -> Self {
        let (ns, values) = grid.iter().filter_map(|&n| self.value_at(n).map(|v| (n, v))).unzip();
        Self { ns, values, source: self.source }
    }

    /// Two-column CSV `n,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,value\n");
        for (n, v) in self.ns.iter().zip(&self.values) {
            s.push_str(&format!("{n},{v:e}\n"));
        }
        s
    }

    pub fn from_csv(text: &str, source: SequenceSource) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut ns = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let n = rec.get(0).and_then(|s| s.trim().parse::<u64>().ok());
            let v = rec.get(1).and_then(|s| s.trim().parse::<f64>().ok());
            match (n, v) {
                (Some(n), Some(v)) => {
                    ns.push(n);
                    values.push(v);
                }
                _ => return Err(Error::InvalidArgument(format!("bad sequence row {rec:?}"))),
            }
        }
        Self::new(ns, values, source)
    }
}

/// `a(n) = sum_k P[phi_1 + ... + phi_k <= n]` for `n = 1..=n_max`, from
/// per-trajectory return-time sequences. Every trajectory must carry enough
/// returns for its partial sums to pass `n_max`.
pub fn empirical_a(return_times: &[Vec<u64>], n_max: u64) -> Result<ReturnSequence> {
    if n_max == 0 {
        return ReturnSequence::new(vec![], vec![], SequenceSource::FromReturnTimes);
    }
    if return_times.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    let mut hist = vec![0u64; n_max as usize + 1];
    for traj in return_times {
        let mut total = 0u64;
        for &phi in traj {
            if phi == 0 {
                return Err(Error::InvalidArgument("return times must be positive".into()));
            }
            total = total.saturating_add(phi);
            if total > n_max {
                break;
            }
            hist[total as usize] += 1;
        }
        if total <= n_max {
            return Err(Error::InsufficientData(format!("a trajectory ends at time {total} before n = {n_max}")));
        }
    }
    let scale = 1.0 / return_times.len() as f64;
    let mut acc = 0u64;
    let values = hist[1..]
        .iter()
        .map(|&h| {
            acc += h;
            acc as f64 * scale
        })
        .collect();
    ReturnSequence::new((1..=n_max).collect(), values, SequenceSource::FromReturnTimes)
}

/// `a_n(omega) = sum_{k=1}^n m(omega ∩ T^{-k} omega) / m(omega)^2` with the
/// correlations estimated from orbits started at `starts`, which should be
/// distributed according to the normalised restriction of `m` to `omega`.
pub fn correlation_a(
    system: &IntervalMapSystem,
    omega: Interval,
    omega_mass: f64,
    starts: &[f64],
    n_max: u64,
    accelerate: bool,
) -> Result<ReturnSequence> {
    if n_max == 0 {
        return ReturnSequence::new(vec![], vec![], SequenceSource::FromCorrelations);
    }
    if starts.is_empty() {
        return Err(Error::InsufficientData("no starting points".into()));
    }
    if !(omega_mass > 0.0) {
        return Err(Error::InvalidArgument("inducing set must have positive mass".into()));
    }
    let mut hist = vec![0u64; n_max as usize + 1];
    for &x in starts {
        let (visits, _) = visit_times(system, x, omega, n_max + 1, accelerate)?;
        for t in visits.into_iter().filter(|&t| t >= 1) {
            hist[t as usize] += 1;
        }
    }
    let scale = 1.0 / (starts.len() as f64 * omega_mass);
    let mut acc = 0u64;
    let values = hist[1..]
        .iter()
        .map(|&h| {
            acc += h;
            acc as f64 * scale
        })
        .collect();
    ReturnSequence::new((1..=n_max).collect(), values, SequenceSource::FromCorrelations)
}

/// Least-squares fit of `log a(n) = c + gamma log n` on a dyadic subgrid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegVarFit {
    pub gamma_hat: f64,
    pub intercept: f64,
    /// `(n, log a(n) - c - gamma log n)` over the fit points.
    pub log_offsets: Vec<(u64, f64)>,
    pub fit_window: (u64, u64),
}

impl RegVarFit {
    /// Spread `max - min` of the log offsets.
    pub fn residual_spread(&self) -> f64 {
        let (lo, hi) = self
            .log_offsets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
        hi - lo
    }

    /// Power-law prediction `exp(c) n^gamma`.
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.gamma_hat * n.ln()).exp()
    }
}

pub fn fit_regvar(seq: &ReturnSequence, fit_window: (u64, u64)) -> Result<RegVarFit> {
    let (lo, hi) = fit_window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ns = Vec::new();
    for n in dyadic_grid(lo.max(1), hi) {
        if let Some(v) = seq.value_at(n) {
            if !(v > 0.0) {
                return Err(Error::DegenerateWindow(format!("a({n}) = {v} is not positive")));
            }
            ns.push(n);
            xs.push((n as f64).ln());
            ys.push(v.ln());
        }
    }
    let (intercept, gamma_hat) =
        least_squares(&xs, &ys).ok_or_else(|| Error::DegenerateWindow(format!("fewer than two dyadic points in [{lo}, {hi}]")))?;
    let log_offsets = ns
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(&n, (x, y))| (n, y - intercept - gamma_hat * x))
        .collect();
    Ok(RegVarFit { gamma_hat, intercept, log_offsets, fit_window })
}

/// `b(m)` with a flag marking power-law extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseValue {
    pub m: f64,
    pub b: f64,
    pub extrapolated: bool,
}

/// `b(m) = min{n : a(n) >= m}`, refined by log-log interpolation between grid
/// points. Outside the data range `fit` (if given) extrapolates.
pub fn asymptotic_inverse(seq: &ReturnSequence, m_grid: &[f64], fit: Option<&RegVarFit>) -> Result<Vec<InverseValue>> {
    let ns = seq.ns();
    let vals = seq.values();
    if ns.is_empty() {
        return Err(Error::InsufficientData("empty sequence".into()));
    }
    let mut out = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let first = vals.partition_point(|&v| v < m);
        if first < vals.len() && (first > 0 || m == vals[0] || (ns[0] == 1 && fit.is_none())) {
            let b = if first == 0 || vals[first] == m || vals[first - 1] <= 0.0 {
                ns[first] as f64
            } else {
                let (a0, a1) = (vals[first - 1].ln(), vals[first].ln());
                let (l0, l1) = ((ns[first - 1] as f64).ln(), (ns[first] as f64).ln());
                (l0 + (m.ln() - a0) / (a1 - a0) * (l1 - l0)).exp()
            };
            out.push(InverseValue { m, b, extrapolated: false });
            continue;
        }
        let fit = fit.ok_or(Error::OutOfRange { arg: m })?;
        if !(fit.gamma_hat > 0.0) {
            return Err(Error::OutOfRange { arg: m });
        }
        // Anchor the power law at the nearest end of the data.
        let (n_ref, a_ref) = if first >= vals.len() {
            (*ns.last().unwrap() as f64, *vals.last().unwrap())
        } else {
            (ns[0] as f64, vals[0])
        };
        let b = n_ref * (m / a_ref).powf(1.0 / fit.gamma_hat);
        out.push(InverseValue { m, b, extrapolated: true });
    }
    Ok(out)
}
