use crate::error::{Error, Result};

/// Two-sided distance `sup |F_n - F|` between the empirical law of a sorted
/// sample and a continuous CDF. Ties are grouped.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((j + 1) as f64 / nf - f);
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample statistic `sup |F_n - G_m|` for sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Dvoretzky-Kiefer-Wolfowitz band `sqrt(ln(2/alpha) / (2n))`.
pub fn dkw_threshold(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Asymptotic two-sample critical value `c(alpha) sqrt((n+m)/(nm))`.
pub fn two_sample_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}
