//! Small numerical helpers shared across modules.

use crate::error::{Error, Result};

/// Γ(x) for real x; thin wrapper so the dependency is named in one place.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Solve `f(x) = target` for increasing `f` on `[lo, hi]` by safeguarded
/// Newton iteration; falls back to bisection whenever a Newton step leaves the
/// current bracket. `df` is the derivative of `f`.
pub fn solve_increasing<F, D>(f: F, df: D, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    solve_increasing_from(f, df, target, lo, hi, 0.5 * (lo + hi), tol)
}

/// As [`solve_increasing`], starting from the guess `x0` inside the bracket.
pub fn solve_increasing_from<F, D>(f: F, df: D, target: f64, lo: f64, hi: f64, x0: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    for _ in 0..300 {
        let r = f(x) - target;
        if r.abs() <= tol {
            return Ok(x);
        }
        if r > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let d = df(x);
        let newton = x - r / d;
        let next = if d.is_finite() && d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if next == x || b - a <= 2.0 * f64::EPSILON * b.abs().max(a.abs()) || b - a < f64::MIN_POSITIVE {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence(format!("root of increasing function near {x}")))
}

/// Integrate `f` over `[a, b]` by double-exponential quadrature. Returns the
/// value and the error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, target: f64) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let out = quadrature::integrate(f, a, b, target);
    (out.integral, out.error_estimate)
}

/// Dyadic grid `2^k` for all `k` with `min <= 2^k <= max` (at least `{1}`).
pub fn dyadic_grid(min: u64, max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 1u64;
    while n <= max {
        if n >= min {
            out.push(n);
        }
        match n.checked_mul(2) {
            Some(m) => n = m,
            None => break,
        }
    }
    out
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_cubic() {
        let x = solve_increasing(|x| x * x * x, |x| 3.0 * x * x, 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn dyadic() {
        assert_eq!(dyadic_grid(4, 40), vec![4, 8, 16, 32]);
        assert_eq!(dyadic_grid(1, 1), vec![1]);
    }

    #[test]
    fn ls_exact_line() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 3.0, 5.0];
        let (a, b) = least_squares(&xs, &ys).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);
    }
}
