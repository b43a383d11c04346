//! Scenario file. Every field has a default, so an empty file is the
//! reference setup: 200×200 P2 data mesh, 100×100 P1 inverse mesh, β = 200,
//! μ₀ = 10, centred disc of radius 0.1, α = 0.05.

use std::path::PathBuf;

use ccbm::assembly::Degree;
use ccbm::forward::{GProfile, NoiseKind};
use ccbm::mesh::{InclusionSpec, Primitive, Rect};
use ccbm::shape::ShapeOptConfig;
use ccbm::topograd::DetectConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: DomainConfig,
    pub forward: ForwardConfig,
    pub inverse: InverseConfig,
    pub truth: TruthConfig,
    pub noise: NoiseConfig,
    pub data: DataConfig,
    pub topo: DetectConfig,
    pub stat: StatConfig,
    pub shape: ShapeConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { xmin: -0.5, xmax: 0.5, ymin: -0.5, ymax: 0.5 }
    }
}

/// Structured `n × n` mesh on which data are synthesized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub n: usize,
    pub degree: Degree,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { n: 200, degree: Degree::P2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    pub n: usize,
    pub degree: Degree,
    pub beta: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self { n: 100, degree: Degree::P1, beta: 200.0 }
    }
}

/// The contact region used to synthesize data. `shapes` has no default
/// once the table is written out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    pub shapes: Vec<Primitive>,
    #[serde(default = "default_g")]
    pub g_profile: GProfile,
}

fn default_mu0() -> f64 {
    10.0
}

fn default_g() -> GProfile {
    GProfile::ConstantOne
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            mu0: default_mu0(),
            shapes: vec![Primitive::Disc { center: [0.0, 0.0], radius: 0.1 }],
            g_profile: GProfile::ConstantOne,
        }
    }
}

/// Noise on the synthesized measurement. `seed` also drives the
/// Monte-Carlo streams.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub delta: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kind: NoiseKind::MultiplicativeField, delta: 0.0, seed: 0 }
    }
}

/// Measured data read from a Cauchy CSV instead of being synthesized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, OneOrMany::Many(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatConfig {
    /// Additive boundary noise level, or a list for a sweep.
    pub delta: OneOrMany,
    pub n_mc: usize,
    pub n_scan: usize,
    pub alpha: f64,
    /// Probe width; 1.5 × grid spacing when absent.
    pub sigma: Option<f64>,
    pub red_fraction: f64,
    /// Probes tracked in the convergence diagnostic.
    pub convergence_probes: usize,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self {
            delta: OneOrMany::One(0.1),
            n_mc: 100,
            n_scan: 20,
            alpha: 0.05,
            sigma: None,
            red_fraction: 0.05,
            convergence_probes: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    pub s: f64,
    pub t0: f64,
    pub max_iters: usize,
    pub quality_floor: f64,
    /// Runs one optimization per value; the inverse β when absent.
    pub betas: Option<Vec<f64>>,
    pub init: InitConfig,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        let c = ShapeOptConfig::default();
        Self { s: c.s, t0: c.t0, max_iters: c.max_iters, quality_floor: c.quality_floor, betas: None, init: InitConfig::default() }
    }
}

/// Initial region: explicit shapes, or the minima of a saved detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub shapes: Vec<Primitive>,
    pub from_topo: Option<PathBuf>,
    pub max_components: Option<usize>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { shapes: vec![Primitive::Disc { center: [0.0, 0.0], radius: 0.3 }], from_topo: None, max_components: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), svg: false }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if let Err(e) = self.rect() {
            return bad("domain", e.to_string());
        }
        if self.forward.n == 0 {
            return bad("forward.n", "must be positive".into());
        }
        if self.inverse.n == 0 {
            return bad("inverse.n", "must be positive".into());
        }
        if !(self.inverse.beta > 0.0 && self.inverse.beta.is_finite()) {
            return bad("inverse.beta", format!("must be positive, got {}", self.inverse.beta));
        }
        if let Err(e) = self.truth_spec() {
            return bad("truth", e.to_string());
        }
        if let Err(e) = self.truth.g_profile.validate() {
            return bad("truth.g_profile", e.to_string());
        }
        if !(self.noise.delta >= 0.0 && self.noise.delta.is_finite()) {
            return bad("noise.delta", format!("must be nonnegative, got {}", self.noise.delta));
        }
        let deltas = self.stat.delta.values();
        if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return bad("stat.delta", format!("needs nonnegative values, got {deltas:?}"));
        }
        if self.stat.n_mc < 2 {
            return bad("stat.n_mc", format!("needs at least 2 realizations for a variance, got {}", self.stat.n_mc));
        }
        if self.stat.n_scan == 0 {
            return bad("stat.n_scan", "must be positive".into());
        }
        if !(self.stat.alpha > 0.0 && self.stat.alpha < 1.0) {
            return bad("stat.alpha", format!("must lie in (0, 1), got {}", self.stat.alpha));
        }
        if !(0.0..=1.0).contains(&self.stat.red_fraction) {
            return bad("stat.red_fraction", format!("must lie in [0, 1], got {}", self.stat.red_fraction));
        }
        if let Some(s) = self.stat.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("stat.sigma", format!("must be positive, got {s}"));
            }
        }
        if self.topo.ring_depth == 0 {
            return bad("topo.ring_depth", "must be at least 1".into());
        }
        if let Err(e) = self.shape_config(self.inverse.beta).validate() {
            return bad("shape", e.to_string());
        }
        if let Some(b) = &self.shape.betas {
            if b.is_empty() || b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("shape.betas", format!("needs positive values, got {b:?}"));
            }
        }
        if self.shape.init.from_topo.is_none() {
            if let Err(e) = InclusionSpec::new(self.shape.init.shapes.clone(), self.truth.mu0, &self.rect().unwrap()) {
                return bad("shape.init.shapes", e.to_string());
            }
        }
        Ok(())
    }

    pub fn rect(&self) -> ccbm::Result<Rect> {
        let d = self.domain;
        Rect::new(d.xmin, d.xmax, d.ymin, d.ymax)
    }

    pub fn truth_spec(&self) -> ccbm::Result<InclusionSpec> {
        InclusionSpec::new(self.truth.shapes.clone(), self.truth.mu0, &self.rect()?)
    }

    pub fn shape_config(&self, beta: f64) -> ShapeOptConfig {
        let s = &self.shape;
        ShapeOptConfig { beta, s: s.s, t0: s.t0, max_iters: s.max_iters, quality_floor: s.quality_floor }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.shape.betas.clone().unwrap_or_else(|| vec![self.inverse.beta])
    }
}
