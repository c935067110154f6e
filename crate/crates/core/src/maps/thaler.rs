//! Maps of the form `T x = F(x) - F(xi_n)` on `(xi_n, xi_{n+1})` with
//! `F(x) = x (1 + x^a) / (1 - x^a)`, `a = 1/gamma`.

use super::{Conditions, Interval, NeutralPoint, PiecewiseMap, BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::numeric;

/// How the partition points are chosen among the admissible ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// Each branch image length is halfway between the previous one and a
    /// fixed floor strictly above the leftmost branch length.
    Midpoint,
    /// Every branch maps onto the whole interval.
    FullImage,
}

impl std::str::FromStr for PartitionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "full_image" | "full-image" => Ok(Self::FullImage),
            other => Err(Error::Config(format!("unknown partition rule '{other}'"))),
        }
    }
}

const CACHED_POINTS: usize = 4096;
/// Fast-forwarding stops once `x^{-1/gamma}` falls to this value.
const JUMP_FLOOR: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct ThalerMap {
    gamma: f64,
    alpha: f64,
    alpha_int: Option<i32>,
    rule: PartitionRule,
    /// Right end of the leftmost branch.
    xi1: f64,
    /// Asymptotic image length of the branches.
    floor: f64,
    edge: f64,
    s_floor: f64,
    /// Coefficients of `s^{-j}`, `j = 1..=7`, in the Fatou coordinate.
    psi: [f64; 7],
    points: Vec<f64>,
}

impl ThalerMap {
    pub fn new(gamma: f64, rule: PartitionRule) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        let alpha = 1.0 / gamma;
        let alpha_int = ((alpha - alpha.round()).abs() < 1e-12 && alpha.round() <= 16.0).then(|| alpha.round() as i32);
        let a2 = alpha * alpha;
        let (a4, a6) = (a2 * a2, a2 * a2 * a2);
        let psi = [
            (2.0 * a2 + 1.0) / (6.0 * alpha),
            -(3.0 * a2 + 2.0) / 12.0,
            (38.0 * a4 + 35.0 * a2 + 2.0) / (135.0 * alpha),
            -(60.0 * a4 + 80.0 * a2 + 13.0) / 180.0,
            (1476.0 * a6 + 3388.0 * a4 + 1141.0 * a2 + 22.0) / (4725.0 * alpha),
            -(259.0 * a6 + 10136.0 * a4 + 7217.0 * a2 + 502.0) / 11340.0,
            -(73396.0 * a4 * a4 - 29900.0 * a6 - 124362.0 * a4 - 23095.0 * a2 - 214.0) / (99225.0 * alpha),
        ];
        let mut map = Self {
            gamma,
            alpha,
            alpha_int,
            rule,
            xi1: 0.0,
            floor: 1.0,
            edge: 0.0,
            s_floor: JUMP_FLOOR,
            psi,
            points: Vec::new(),
        };
        map.xi1 = map.f_inv(1.0);
        if rule == PartitionRule::Midpoint {
            map.floor = 0.5 * (1.0 + map.xi1);
        }
        map.edge = JUMP_FLOOR.powf(-gamma).min(0.5 * map.xi1);
        map.s_floor = map.edge.powf(-alpha);
        map.points = (0..=CACHED_POINTS).map(|n| map.f_inv(map.offset(n as u64))).collect();
        map.points[0] = 0.0;
        Ok(map)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rule(&self) -> PartitionRule {
        self.rule
    }

    /// `u = x^a` and `1 - u`, the latter without cancellation.
    #[inline]
    fn powers(&self, x: f64) -> (f64, f64) {
        match self.alpha_int {
            Some(m) => {
                let u = x.powi(m);
                let mut geo = 1.0;
                for _ in 1..m {
                    geo = geo * x + 1.0;
                }
                (u, (1.0 - x) * geo)
            }
            None => {
                let l = self.alpha * x.ln();
                (l.exp(), -l.exp_m1())
            }
        }
    }

    /// The generating function `F`.
    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        let (u, w) = self.powers(x);
        x * (1.0 + u) / w
    }

    #[inline]
    fn f_prime_from(&self, u: f64, w: f64) -> f64 {
        (1.0 + u) / w * (1.0 + 2.0 * self.alpha * u / (w * (1.0 + u)))
    }

    pub fn f_prime(&self, x: f64) -> f64 {
        let (u, w) = self.powers(x);
        self.f_prime_from(u, w)
    }

    /// Inverse of `F` on `(0, 1)`, solved for `log F`.
    pub fn f_inv(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let guess = if v < 0.5 {
            v / (1.0 + 2.0 * v.powf(self.alpha))
        } else {
            (1.0 - 2.0 / (self.alpha * v + 2.0)).clamp(0.01, 1.0 - 1e-16)
        };
        let ln_f = |x: f64| {
            let (u, w) = self.powers(x);
            x.ln() + u.ln_1p() - w.ln()
        };
        let d_ln_f = |x: f64| {
            let (u, w) = self.powers(x);
            (1.0 + 2.0 * self.alpha * u / (w * (1.0 + u))) / x
        };
        numeric::solve_increasing_from(ln_f, d_ln_f, v.ln(), 0.0, 1.0, guess, 4e-16).unwrap_or(guess)
    }

    /// `F(xi_n)`: cumulative image length of branches `0..n`.
    #[inline]
    pub fn offset(&self, n: u64) -> f64 {
        self.offset_at(n as f64)
    }

    fn offset_at(&self, n: f64) -> f64 {
        match self.rule {
            PartitionRule::FullImage => n,
            PartitionRule::Midpoint => n * self.floor + 2.0 * (1.0 - self.floor) * (1.0 - (-n).exp2()),
        }
    }

    /// Image length of branch `n`.
    #[inline]
    pub fn image_len(&self, n: u64) -> f64 {
        match self.rule {
            PartitionRule::FullImage => 1.0,
            PartitionRule::Midpoint => self.floor + (1.0 - self.floor) * (-(n as f64)).exp2(),
        }
    }

    /// Partition point `xi_n`.
    pub fn point(&self, n: u64) -> f64 {
        match self.points.get(n as usize) {
            Some(&p) => p,
            None => self.f_inv(self.offset(n)),
        }
    }

    pub fn xi1(&self) -> f64 {
        self.xi1
    }

    /// Smallest image length over all branches.
    pub fn min_image_len(&self) -> f64 {
        self.floor
    }

    /// Branch index for a value `v = F(x)`.
    #[inline]
    fn branch_of_value(&self, v: f64) -> u64 {
        let mut n = match self.rule {
            PartitionRule::FullImage => v.floor(),
            PartitionRule::Midpoint => ((v - 2.0 * (1.0 - self.floor)) / self.floor).floor().max(0.0),
        } as u64;
        while n > 0 && self.offset(n) > v {
            n -= 1;
        }
        while self.offset(n + 1) <= v {
            n += 1;
        }
        n
    }

    fn psi_fn(&self, s: f64) -> f64 {
        let r = 1.0 / s;
        let tail = self.psi.iter().rev().fold(0.0, |acc, c| (acc + c) * r);
        s / (2.0 * self.alpha) + 0.5 * s.ln() + tail
    }

    fn psi_prime(&self, s: f64) -> f64 {
        let r = 1.0 / s;
        let tail = self
            .psi
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (j, c)| (acc - (j + 1) as f64 * c) * r);
        1.0 / (2.0 * self.alpha) + 0.5 * r + tail * r
    }

    fn psi_inv(&self, p: f64, near: f64) -> f64 {
        let mut s = near.max(self.s_floor * 0.5);
        for _ in 0..60 {
            let step = (self.psi_fn(s) - p) / self.psi_prime(s);
            let next = (s - step).max(0.5 * s);
            if (next - s).abs() <= 1e-15 * s {
                return next;
            }
            s = next;
        }
        s
    }
}

impl PiecewiseMap for ThalerMap {
    fn name(&self) -> String {
        format!("thaler(gamma={}, {:?})", self.gamma, self.rule)
    }

    fn domain(&self) -> Interval {
        Interval { lo: 0.0, hi: 1.0 }
    }

    fn branch_count(&self) -> Option<usize> {
        None
    }

    fn branch_domain(&self, i: usize) -> Option<Interval> {
        let lo = self.point(i as u64);
        let hi = self.point(i as u64 + 1);
        (hi - lo >= 1e-15).then_some(Interval { lo, hi })
    }

    fn branch_image(&self, i: usize) -> Interval {
        Interval { lo: 0.0, hi: self.image_len(i as u64) }
    }

    fn locate(&self, x: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::OutsideDomain { x, lo: 0.0, hi: 1.0 });
        }
        Ok(self.branch_of_value(self.f(x)) as usize)
    }

    #[inline]
    fn forward(&self, i: usize, x: f64) -> f64 {
        self.f(x) - self.offset(i as u64)
    }

    fn derivative(&self, _i: usize, x: f64) -> f64 {
        self.f_prime(x)
    }

    fn inverse(&self, i: usize, y: f64) -> Option<f64> {
        Some(self.f_inv(y + self.offset(i as u64)))
    }

    fn interpolates_branches(&self) -> bool {
        true
    }

    fn inverse_family(&self, t: f64, y: f64) -> Option<(f64, f64)> {
        let len = match self.rule {
            PartitionRule::FullImage => 1.0,
            PartitionRule::Midpoint => self.floor + (1.0 - self.floor) * (-t).exp2(),
        };
        if !(y > 0.0 && y < len) {
            return None;
        }
        let x = self.f_inv(y + self.offset_at(t));
        let d = self.f_prime(x);
        Some((x, if d.is_finite() { 1.0 / d } else { 0.0 }))
    }

    fn conditions(&self) -> Conditions {
        Conditions {
            adler: true,
            big_images: true,
            rychlik: false,
            uniform_expansion: false,
            finite_images: self.rule == PartitionRule::FullImage,
        }
    }

    fn neutral_point(&self) -> Option<NeutralPoint> {
        Some(NeutralPoint { location: 0.0, gamma: self.gamma, kappa: 2.0, zone_edge: self.edge })
    }

    /// Uses an asymptotic Fatou coordinate of the leftmost branch in the
    /// variable `s = x^{-a}`.
    fn fast_forward(&self, x: f64, max_steps: u64) -> Option<(u64, f64)> {
        if !(x > 0.0 && x < self.edge) {
            return None;
        }
        let s = match self.alpha_int {
            Some(m) => x.powi(-m),
            None => x.powf(-self.alpha),
        };
        if !s.is_finite() {
            return Some((max_steps, x));
        }
        let p = self.psi_fn(s);
        let room = (p - self.psi_fn(self.s_floor)).floor();
        let k = if room >= max_steps as f64 { max_steps } else { room as u64 };
        if k < 2 {
            return None;
        }
        let target = p - k as f64;
        if target == p {
            return Some((k, x));
        }
        let s_new = self.psi_inv(target, s - 2.0 * self.alpha * k as f64);
        Some((k, s_new.powf(-self.gamma)))
    }

    #[inline]
    fn apply(&self, x: f64) -> Result<(f64, usize)> {
        if !(x > BOUNDARY_TOL && x < 1.0) {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::OutsideDomain { x, lo: 0.0, hi: 1.0 });
            }
            return Err(Error::PointOnPartitionBoundary { x });
        }
        let (u, w) = self.powers(x);
        let v = x * (1.0 + u) / w;
        let n = self.branch_of_value(v);
        let y = v - self.offset(n);
        let slack = BOUNDARY_TOL * self.f_prime_from(u, w);
        if y < slack || self.image_len(n) - y < slack {
            return Err(Error::PointOnPartitionBoundary { x });
        }
        Ok((y, n as usize))
    }
}
