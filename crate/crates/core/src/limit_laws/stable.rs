//! The unit-mean Mittag-Leffler law `Y` with `E Y^p = p! Gamma(1+g)^p / Gamma(1+pg)`
//! and the positive stable law `Z` with `E exp(-tZ) = exp(-Gamma(1+g) t^g)`.
//!
//! Both are built from the standard stable variable `W` with Laplace
//! transform `exp(-t^g)`: `Z = Gamma(1+g)^(1/g) W` and `Y = Gamma(1+g) W^(-g)`.
//! With these scales `Y = Gamma(1+g)^2 Z^(-g)` in distribution.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, Open01};

use crate::error::{Error, Result};
use crate::numeric::{self, gamma, ln_gamma};

/// Absolute accuracy target for the CDFs.
pub const CDF_TARGET: f64 = 1e-6;

/// `E Y^p` for the unit-mean Mittag-Leffler law of order `g`.
pub fn ml_moment(g: f64, p: u32) -> f64 {
    if g == 1.0 {
        return 1.0;
    }
    let p = p as f64;
    (ln_gamma(p + 1.0) + p * ln_gamma(1.0 + g) - ln_gamma(1.0 + p * g)).exp()
}

/// `E exp(-t Z)`.
pub fn stable_laplace(g: f64, t: f64) -> f64 {
    (-gamma(1.0 + g) * t.powf(g)).exp()
}

/// `ln A(theta)` for Zolotarev's function
/// `A = (sin(g th)/sin th)^(1/(1-g)) sin((1-g) th)/sin(g th)`.
fn log_zolotarev(g: f64, th: f64) -> f64 {
    let sg = (g * th).sin().ln();
    ((sg - th.sin().ln()) / (1.0 - g)) + ((1.0 - g) * th).sin().ln() - sg
}

/// Draw `W` with `E exp(-tW) = exp(-t^g)`, `0 < g < 1`, by Kanter's
/// representation `W = (A(U)/E)^((1-g)/g)`.
fn standard_stable<R: Rng + ?Sized>(rng: &mut R, g: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) * PI;
    let e: f64 = rng.sample(Exp1);
    ((log_zolotarev(g, u) - e.ln()) * (1.0 - g) / g).exp()
}

fn check_stable_gamma(g: f64) -> Result<()> {
    if g > 0.0 && g <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(g))
    }
}

fn check_ml_gamma(g: f64) -> Result<()> {
    if (0.0..=1.0).contains(&g) {
        Ok(())
    } else {
        Err(Error::InvalidGamma(g))
    }
}

/// Draw `Z`.
pub fn stable_sample<R: Rng + ?Sized>(rng: &mut R, g: f64) -> Result<f64> {
    check_stable_gamma(g)?;
    if g == 1.0 {
        return Ok(1.0);
    }
    Ok(gamma(1.0 + g).powf(1.0 / g) * standard_stable(rng, g))
}

/// Draw `Y`.
pub fn ml_sample<R: Rng + ?Sized>(rng: &mut R, g: f64) -> Result<f64> {
    check_ml_gamma(g)?;
    if g == 1.0 {
        return Ok(1.0);
    }
    if g == 0.0 {
        return Ok(rng.sample(Exp1));
    }
    let u: f64 = rng.sample::<f64, _>(Open01) * PI;
    let e: f64 = rng.sample(Exp1);
    // W^(-g) = (E / A)^(1-g).
    Ok(gamma(1.0 + g) * ((e.ln() - log_zolotarev(g, u)) * (1.0 - g)).exp())
}

/// `(P[W <= x], P[W > x])` from
/// `P[W <= x] = (1/pi) int_0^pi exp(-A(th) x^(-g/(1-g))) dth`.
fn standard_cdf_sf(g: f64, x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let c = -g / (1.0 - g) * x.ln();
    let expo = |th: f64| (log_zolotarev(g, th) + c).exp();
    // Split where the exponent passes a few levels around 1 so each piece is
    // smooth at its own scale.
    let level_at = |level: f64| -> Option<f64> {
        let (mut a, mut b) = (1e-12, PI);
        if log_zolotarev(g, a) + c >= level {
            return None;
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if log_zolotarev(g, m) + c < level {
                a = m;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    };
    let mut cuts = vec![0.0];
    cuts.extend([-6.0, -2.0, 0.0, 1.5, 3.5].iter().filter_map(|&l| level_at(l)));
    cuts.push(PI);
    cuts.dedup();
    let piece_target = 0.1 * CDF_TARGET * PI / cuts.len() as f64;
    let pieces: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let (mut cdf, mut sf, mut err) = (0.0, 0.0, 0.0);
    for (a, b) in pieces {
        let (v, e) = numeric::integrate(|th| (-expo(th)).exp(), a, b, piece_target);
        let (w, f) = numeric::integrate(|th| -(-expo(th)).exp_m1(), a, b, piece_target);
        cdf += v;
        sf += w;
        err += e.min(f);
    }
    let (cdf, sf) = ((cdf / PI).clamp(0.0, 1.0), (sf / PI).clamp(0.0, 1.0));
    let estimate = err / PI + (cdf + sf - 1.0).abs();
    if estimate > CDF_TARGET {
        return Err(Error::NumericalAccuracyLoss { estimate, target: CDF_TARGET });
    }
    Ok((cdf, sf))
}

/// `P[Z <= z]`.
pub fn stable_cdf(g: f64, z: f64) -> Result<f64> {
    Ok(stable_cdf_sf(g, z)?.0)
}

/// `P[Z > z]`.
pub fn stable_sf(g: f64, z: f64) -> Result<f64> {
    Ok(stable_cdf_sf(g, z)?.1)
}

fn stable_cdf_sf(g: f64, z: f64) -> Result<(f64, f64)> {
    check_stable_gamma(g)?;
    if z.is_nan() || z < 0.0 {
        return Err(Error::InvalidArgument(format!("stable CDF at {z}")));
    }
    if g == 1.0 {
        return Ok(if z >= 1.0 { (1.0, 0.0) } else { (0.0, 1.0) });
    }
    standard_cdf_sf(g, z / gamma(1.0 + g).powf(1.0 / g))
}

/// `P[Y <= y]`.
pub fn ml_cdf(g: f64, y: f64) -> Result<f64> {
    check_ml_gamma(g)?;
    if y.is_nan() || y < 0.0 {
        return Err(Error::InvalidArgument(format!("Mittag-Leffler CDF at {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if g == 0.0 {
        return Ok(-(-y).exp_m1());
    }
    if g == 1.0 {
        return Ok(if y >= 1.0 { 1.0 } else { 0.0 });
    }
    let gg = gamma(1.0 + g);
    stable_sf(g, (gg * gg / y).powf(1.0 / g))
}

/// Unit-mean Mittag-Leffler law of order `gamma` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLefflerDist {
    gamma: f64,
}

impl MittagLefflerDist {
    pub fn new(gamma: f64) -> Result<Self> {
        check_ml_gamma(gamma)?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn moment(&self, p: u32) -> f64 {
        ml_moment(self.gamma, p)
    }

    pub fn mean(&self) -> f64 {
        1.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        ml_sample(rng, self.gamma).expect("validated order")
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        ml_cdf(self.gamma, y)
    }
}

/// Positive stable law of index `gamma` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveStableDist {
    gamma: f64,
}

impl PositiveStableDist {
    pub fn new(gamma: f64) -> Result<Self> {
        check_stable_gamma(gamma)?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn laplace(&self, t: f64) -> f64 {
        stable_laplace(self.gamma, t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        stable_sample(rng, self.gamma).expect("validated index")
    }

    pub fn cdf(&self, z: f64) -> Result<f64> {
        stable_cdf(self.gamma, z)
    }

    /// Quantile by bisection in `ln z`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level {p}")));
        }
        if self.gamma == 1.0 {
            return Ok(1.0);
        }
        let (mut a, mut b) = (-60.0f64, 60.0f64);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if self.cdf(m.exp())? < p {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        Ok((0.5 * (a + b)).exp())
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }
}
