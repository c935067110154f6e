//! Experiment configuration read from TOML.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::maps::{Interval, IntervalMapSystem, PartitionRule};
use crate::numeric::dyadic_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    BooleLike,
    Thaler,
    Doubling,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub family: MapFamily,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_rule")]
    pub partition_rule: PartitionRule,
}

fn default_rule() -> PartitionRule {
    PartitionRule::Midpoint
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trajectories: usize,
    pub seed: u64,
    pub grid_min: u64,
    pub grid_max: u64,
    pub return_cap: u64,
    /// Induced returns applied to invariant-law starts.
    pub burn_in: usize,
    pub calibration_replicates: usize,
    pub calibration_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trajectories: 1000,
            seed: 1,
            grid_min: 16,
            grid_max: 1 << 16,
            return_cap: 100_000_000,
            burn_in: 16,
            calibration_replicates: 25,
            calibration_factor: 2.0,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl From<Window> for Interval {
    fn from(w: Window) -> Self {
        Interval { lo: w.lo, hi: w.hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    /// Lebesgue measure restricted to the window.
    #[default]
    Uniform,
    /// Uniform starts in the set pushed forward by `burn_in` induced returns,
    /// approximating the normalised invariant measure on the set.
    Invariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub law: Option<InitialLaw>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StableSource {
    #[default]
    Induced,
    IidPareto,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StableConfig {
    pub source: StableSource,
    /// Index of the iid Pareto control; defaults to the map's.
    pub gamma: Option<f64>,
    pub constant: u64,
    /// Trajectories kept for the return-sequence estimate behind `b(n)`.
    pub scale_trajectories: usize,
}

impl Default for StableConfig {
    fn default() -> Self {
        StableConfig { source: StableSource::Induced, gamma: None, constant: 2, scale_trajectories: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    #[default]
    Loglog,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LilConfig {
    pub tau: TauRule,
    pub tau_constant: f64,
    /// Accepted range of the median running minimum, as factors of the target.
    pub band: [f64; 2],
}

impl Default for LilConfig {
    fn default() -> Self {
        LilConfig { tau: TauRule::Loglog, tau_constant: 1.0, band: [0.25, 4.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenyiConfig {
    /// Absolute band for the ratio over the last decade; defaults to
    /// `[0.86, 1.15]` times the limit moment ratio.
    pub band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub p_max: u32,
    pub lambdas: Vec<f64>,
    pub band: [f64; 2],
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig { p_max: 2, lambdas: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3], band: [0.8, 1.25] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    Linear,
    NOverLog,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WpdeConfig {
    /// Normalising sequence; defaults by map family.
    pub a_seq: Option<ScaleRule>,
    pub a_const: f64,
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Decay rate `r` of the envelope's `tau(p) = exp(-r p)`.
    pub tau_rate: f64,
}

impl Default for WpdeConfig {
    fn default() -> Self {
        WpdeConfig { a_seq: None, a_const: 1.0, points: 20, lo: 0.1, hi: 1.0, tol: 0.15, tau_rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenewalConfig {
    pub lambdas: Vec<f64>,
    pub window: [f64; 2],
    pub tol: f64,
}

impl Default for RenewalConfig {
    fn default() -> Self {
        RenewalConfig { lambdas: vec![1e-1, 3e-2, 1e-2, 5e-3, 2e-3, 1e-3], window: [1e-3, 1e-2], tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingConfig {
    pub max_len: usize,
    pub min_prob: f64,
    pub tests: usize,
    pub samples: usize,
    pub n_max: u64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig { max_len: 3, min_prob: 1e-6, tests: 32, samples: 1 << 20, n_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlamConfig {
    pub cells: usize,
    pub window: Option<Window>,
    pub ref_set: Option<Window>,
    /// Mass of `ref_set`; defaults to the integral of the reference density.
    pub ref_mass: Option<f64>,
    pub compare: Option<Window>,
    pub tol: f64,
    pub export_matrix: bool,
}

impl Default for UlamConfig {
    fn default() -> Self {
        UlamConfig { cells: 1 << 13, window: None, ref_set: None, ref_mass: None, compare: None, tol: 0.03, export_matrix: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    pub n_max: usize,
    pub slope_tol: f64,
    pub const_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { n_max: 1_000_000, slope_tol: 0.01, const_tol: 0.02 }
    }
}

/// Everything one experiment run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    #[serde(default)]
    pub run: RunConfig,
    /// Observable / inducing set; defaults by map family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Window>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub stable: StableConfig,
    #[serde(default)]
    pub lil: LilConfig,
    #[serde(default)]
    pub renyi: RenyiConfig,
    #[serde(default)]
    pub moments: MomentsConfig,
    #[serde(default)]
    pub wpde: WpdeConfig,
    #[serde(default)]
    pub renewal: RenewalConfig,
    #[serde(default)]
    pub mixing: MixingConfig,
    #[serde(default)]
    pub ulam: UlamConfig,
    #[serde(default)]
    pub tail: TailConfig,
}

impl ExperimentConfig {
    pub fn new(map: MapConfig) -> Self {
        ExperimentConfig {
            map,
            run: RunConfig::default(),
            set: None,
            initial: InitialConfig::default(),
            stable: StableConfig::default(),
            lil: LilConfig::default(),
            renyi: RenyiConfig::default(),
            moments: MomentsConfig::default(),
            wpde: WpdeConfig::default(),
            renewal: RenewalConfig::default(),
            mixing: MixingConfig::default(),
            ulam: UlamConfig::default(),
            tail: TailConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation, hashed as a git blob.
    pub fn digest(&self) -> String {
        let text = self.to_toml();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()));
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.trajectories == 0 {
            return Err(Error::Config("run.trajectories must be at least 1".into()));
        }
        if r.grid_min == 0 || r.grid_min > r.grid_max {
            return Err(Error::Config(format!("grid [{}, {}] is empty", r.grid_min, r.grid_max)));
        }
        if r.return_cap == 0 {
            return Err(Error::Config("run.return_cap must be positive".into()));
        }
        if !(r.calibration_factor > 0.0) || r.calibration_replicates == 0 {
            return Err(Error::Config("calibration needs a positive factor and at least one replicate".into()));
        }
        match (self.map.family, self.map.gamma) {
            (MapFamily::Thaler, None) => return Err(Error::Config("thaler map needs map.gamma".into())),
            (MapFamily::Thaler, Some(g)) if !(g > 0.0 && g < 1.0) => {
                return Err(Error::Config(format!("map.gamma = {g} must lie in (0, 1)")))
            }
            _ => {}
        }
        let d = self.system()?.domain();
        let set = self.set_interval()?;
        if !(set.lo >= d.lo && set.hi <= d.hi && set.lo < set.hi) {
            return Err(Error::Config(format!("set {set} is not a subinterval of {d}")));
        }
        let w = self.initial_window()?;
        if !(w.lo >= d.lo && w.hi <= d.hi && w.lo < w.hi) {
            return Err(Error::Config(format!("initial window {w} is not a subinterval of {d}")));
        }
        if self.moments.p_max > 3 {
            return Err(Error::Config("moments.p_max must be at most 3".into()));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<IntervalMapSystem> {
        Ok(match self.map.family {
            MapFamily::BooleLike => IntervalMapSystem::boole_like(),
            MapFamily::Thaler => {
                let g = self.map.gamma.ok_or_else(|| Error::Config("thaler map needs map.gamma".into()))?;
                IntervalMapSystem::thaler(g, self.map.partition_rule)?
            }
            MapFamily::Doubling => IntervalMapSystem::doubling(),
            MapFamily::Identity => IntervalMapSystem::identity(),
        })
    }

    /// Tail index of the occupation-time limit; 1 for finite-measure maps.
    pub fn gamma(&self) -> f64 {
        match self.map.family {
            MapFamily::Thaler => self.map.gamma.unwrap_or(1.0),
            _ => 1.0,
        }
    }

    pub fn infinite_measure(&self) -> bool {
        matches!(self.map.family, MapFamily::BooleLike | MapFamily::Thaler)
    }

    pub fn set_interval(&self) -> Result<Interval> {
        if let Some(w) = self.set {
            return Ok(w.into());
        }
        Ok(match self.map.family {
            MapFamily::BooleLike => Interval { lo: 0.5, hi: 1.0 },
            MapFamily::Thaler => {
                let s = self.system()?;
                let xi1 = s.map().branch_domain(0).map(|b| b.hi).unwrap_or(0.5);
                Interval { lo: xi1, hi: 1.0 }
            }
            MapFamily::Doubling => Interval { lo: 0.0, hi: 0.5 },
            MapFamily::Identity => Interval { lo: 0.0, hi: 1.0 },
        })
    }

    pub fn initial_window(&self) -> Result<Interval> {
        let set = self.set_interval()?;
        Ok(Interval { lo: self.initial.lo.unwrap_or(set.lo), hi: self.initial.hi.unwrap_or(set.hi) })
    }

    /// Dyadic grid in `[grid_min, grid_max]`, closed by `grid_max` itself.
    pub fn grid(&self) -> Vec<u64> {
        let mut g = dyadic_grid(self.run.grid_min, self.run.grid_max);
        if g.last() != Some(&self.run.grid_max) {
            g.push(self.run.grid_max);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml("[map]\nfamily = \"boole_like\"\n").unwrap();
        assert_eq!(cfg.run.trajectories, 1000);
        assert_eq!(cfg.set_interval().unwrap(), Interval { lo: 0.5, hi: 1.0 });
        assert_eq!(cfg.gamma(), 1.0);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.digest(), cfg.digest());
    }

    #[test]
    fn grid_closes_at_max() {
        let mut cfg = ExperimentConfig::new(MapConfig { family: MapFamily::Doubling, gamma: None, partition_rule: PartitionRule::Midpoint });
        cfg.run.grid_min = 100;
        cfg.run.grid_max = 1000;
        assert_eq!(cfg.grid(), vec![128, 256, 512, 1000]);
        cfg.run.grid_max = 1024;
        assert_eq!(cfg.grid(), vec![128, 256, 512, 1024]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("[map]\nfamily = \"thaler\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[map]\nfamily = \"thaler\"\ngamma = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml("[map]\nfamily = \"doubling\"\n[run]\ntrajectories = 0\n").is_err());
        assert!(ExperimentConfig::from_toml("[map]\nfamily = \"doubling\"\n[run]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[map]\nfamily = \"doubling\"\n[set]\nlo = 0.5\nhi = 2.0\n").is_err());
        let digest_a = ExperimentConfig::from_toml("[map]\nfamily = \"doubling\"\n").unwrap().digest();
        let digest_b = ExperimentConfig::from_toml("[map]\nfamily = \"doubling\"\n[run]\nseed = 2\n").unwrap().digest();
        assert_ne!(digest_a, digest_b);
    }
}
