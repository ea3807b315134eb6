//! TOML run configuration.
//!
//! ```toml
//! mode = "network"          # junction | stability | network | stats
//! output = "out"
//!
//! [model]                   # sigma = a + b*sin^2(c*theta)
//! a = 1.0
//! b = 0.25
//! c = 2.0
//!
//! [dynamics]
//! gamma = 1.0
//! eta = 10.0                # or herring = true
//!
//! [network]
//! n_grains = 500
//! seed = 1
//! runs = 3
//! stop_fraction = 0.2
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::AnchorTriangle;
use crate::network_sim::Scheme;
use crate::statistics::DEFAULT_BINS;
use crate::surface_tension::SurfaceTensionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Junction,
    Stability,
    Network,
    Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { a: 1.0, b: 0.25, c: 2.0 }
    }
}

impl ModelConfig {
    pub fn model(&self) -> SurfaceTensionModel {
        SurfaceTensionModel::sin_squared(self.a, self.b, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub gamma: f64,
    pub eta: f64,
    /// Infinite junction mobility.
    pub herring: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { gamma: 1.0, eta: 1.0, herring: false }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JunctionConfig {
    /// `x1 y1 x2 y2 x3 y3`.
    pub triangle: [f64; 6],
    pub alpha0: [f64; 3],
    /// Initial junction position; defaults to a point offset from equilibrium.
    pub a0: Option<[f64; 2]>,
    pub t_end: f64,
    pub sample_dt: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for JunctionConfig {
    fn default() -> Self {
        JunctionConfig {
            triangle: [0.0, 0.0, 1.0, 0.0, 0.4, 0.8],
            alpha0: [0.1, -0.05, 0.02],
            a0: None,
            t_end: 10.0,
            sample_dt: 0.01,
            rtol: 1e-10,
            atol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub n_triangles: usize,
    pub seed: u64,
    /// Also integrate a perturbed trajectory and measure its decay rate.
    pub measure: bool,
    /// Perturbation radius relative to the shortest equilibrium boundary.
    pub perturbation: f64,
    pub t_end: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { n_triangles: 100, seed: 0, measure: true, perturbation: 1e-3, t_end: 40.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    Euler,
    Heun,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Euler => Scheme::Euler,
            SchemeName::Heun => Scheme::Heun,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub n_grains: usize,
    pub orientation_std: f64,
    pub seed: u64,
    /// Independent trials with seeds `seed, seed+1, …`.
    pub runs: usize,
    /// Stop once `N ≤ stop_fraction·N₀`.
    pub stop_fraction: Option<f64>,
    pub t_end: Option<f64>,
    pub max_steps: usize,
    /// Snapshot every this many steps; 0 writes only the initial and final state.
    pub snapshot_every: usize,
    pub scheme: SchemeName,
    pub gbcd_bins: usize,
    /// Validate the network after every step.
    pub check_invariants: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_grains: 500,
            orientation_std: 0.1,
            seed: 1,
            runs: 1,
            stop_fraction: Some(0.2),
            t_end: None,
            max_steps: 5_000_000,
            snapshot_every: 0,
            scheme: SchemeName::Euler,
            gbcd_bins: DEFAULT_BINS,
            check_invariants: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub snapshots: Vec<PathBuf>,
    pub bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { snapshots: Vec::new(), bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub junction: JunctionConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub stats: StatsConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        RunConfig {
            mode,
            output: default_output(),
            model: ModelConfig::default(),
            dynamics: DynamicsConfig::default(),
            junction: JunctionConfig::default(),
            stability: StabilityConfig::default(),
            network: NetworkConfig::default(),
            stats: StatsConfig::default(),
        }
    }

    /// Parses without range checks, for callers that override fields first.
    pub fn parse_unvalidated(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| cfg_err("<document>", e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn model(&self) -> SurfaceTensionModel {
        self.model.model()
    }

    pub fn triangle(&self) -> Result<AnchorTriangle> {
        AnchorTriangle::from_coords(self.junction.triangle).map_err(|e| cfg_err("junction.triangle", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        for (f, x) in [("model.a", m.a), ("model.b", m.b), ("model.c", m.c)] {
            if !x.is_finite() {
                return Err(cfg_err(f, "must be finite"));
            }
        }
        positive("model.a", m.a)?;
        if m.b < 0.0 {
            return Err(cfg_err("model.b", "must be non-negative"));
        }
        positive("dynamics.gamma", self.dynamics.gamma)?;
        if !self.dynamics.herring {
            positive("dynamics.eta", self.dynamics.eta)?;
        }
        match self.mode {
            Mode::Junction => {
                if self.dynamics.herring {
                    return Err(cfg_err("dynamics.herring", "the single-junction model needs a finite eta"));
                }
                let j = &self.junction;
                self.triangle()?;
                if j.alpha0.iter().chain(j.a0.iter().flatten()).any(|x| !x.is_finite()) {
                    return Err(cfg_err("junction.alpha0", "initial data must be finite"));
                }
                positive("junction.t_end", j.t_end)?;
                positive("junction.sample_dt", j.sample_dt)?;
                positive("junction.rtol", j.rtol)?;
                positive("junction.atol", j.atol)?;
            }
            Mode::Stability => {
                if self.dynamics.herring {
                    return Err(cfg_err("dynamics.herring", "stability analysis needs a finite eta"));
                }
                let s = &self.stability;
                if s.n_triangles == 0 {
                    return Err(cfg_err("stability.n_triangles", "must be at least 1"));
                }
                positive("stability.perturbation", s.perturbation)?;
                if s.perturbation >= 0.5 {
                    return Err(cfg_err("stability.perturbation", "must be below 0.5"));
                }
                positive("stability.t_end", s.t_end)?;
            }
            Mode::Network => {
                let n = &self.network;
                if n.n_grains < 3 {
                    return Err(cfg_err("network.n_grains", "must be at least 3"));
                }
                positive("network.orientation_std", n.orientation_std)?;
                if n.runs == 0 {
                    return Err(cfg_err("network.runs", "must be at least 1"));
                }
                if n.stop_fraction.is_none() && n.t_end.is_none() {
                    return Err(cfg_err("network.stop_fraction", "set stop_fraction or t_end"));
                }
                if let Some(f) = n.stop_fraction {
                    if !(f > 0.0 && f < 1.0) {
                        return Err(cfg_err("network.stop_fraction", format!("must lie in (0, 1), got {f}")));
                    }
                }
                if let Some(t) = n.t_end {
                    positive("network.t_end", t)?;
                }
                if n.max_steps == 0 {
                    return Err(cfg_err("network.max_steps", "must be at least 1"));
                }
                if n.gbcd_bins < 2 {
                    return Err(cfg_err("network.gbcd_bins", "must be at least 2"));
                }
            }
            Mode::Stats => {
                if self.stats.snapshots.is_empty() {
                    return Err(cfg_err("stats.snapshots", "list at least one snapshot"));
                }
                if self.stats.bins < 2 {
                    return Err(cfg_err("stats.bins", "must be at least 2"));
                }
            }
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    /// Parses and validates.
    fn from_str(s: &str) -> Result<Self> {
        let cfg = RunConfig::parse_unvalidated(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = "mode = \"junction\"".parse().unwrap();
        assert_eq!(cfg.dynamics.gamma, 1.0);
        assert_eq!(cfg.output, PathBuf::from("out"));
    }

    #[test]
    fn gamma_error_names_field() {
        let err = "mode = \"junction\"\n[dynamics]\ngamma = 0.0\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "dynamics.gamma"), "{err}");
    }

    #[test]
    fn herring_rejected_for_junction_mode() {
        let err = "mode = \"junction\"\n[dynamics]\nherring = true\n".parse::<RunConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "dynamics.herring"));
        "mode = \"network\"\n[dynamics]\nherring = true\n".parse::<RunConfig>().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!("mode = \"network\"\n[network]\nn_grain = 5\n".parse::<RunConfig>().is_err());
        assert!("mode = \"nope\"".parse::<RunConfig>().is_err());
    }

    #[test]
    fn stop_rule_required() {
        let s = "mode = \"network\"\n[network]\nstop_fraction = 1.5\n";
        assert!(s.parse::<RunConfig>().is_err());
    }
}
