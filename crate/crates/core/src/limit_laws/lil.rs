use crate::error::{Error, Result};
use crate::numeric::gamma;

/// Constants of the one-sided law of the iterated logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LilConstants {
    pub gamma: f64,
    /// `Gamma(1+g) / (g^g (1-g)^(1-g))`.
    pub k: f64,
    /// `k^(-1/g)`.
    pub c: f64,
}

pub fn lil_constants(g: f64) -> Result<LilConstants> {
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::InvalidGamma(g));
    }
    let k = gamma(1.0 + g) / (g.powf(g) * (1.0 - g).powf(1.0 - g));
    Ok(LilConstants { gamma: g, k, c: k.powf(-1.0 / g) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half() {
        let l = lil_constants(0.5).unwrap();
        assert!((l.k - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((l.c - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn limit_at_one() {
        assert!((lil_constants(0.999).unwrap().c - 1.0).abs() < 1e-2);
        assert!(lil_constants(1.0).is_err());
        assert!(lil_constants(0.0).is_err());
    }

    #[test]
    fn k_exceeds_one() {
        for i in 1..100 {
            let g = i as f64 / 100.0;
            assert!(lil_constants(g).unwrap().k > 1.0, "gamma {g}");
        }
    }
}
