//! Run configuration, one JSON document per experiment.
//!
//! Unknown keys anywhere in the document are rejected so typos fail
//! loudly instead of silently falling back to defaults. Every block
//! mirrors the knobs of the module it drives; omitted values take the
//! module defaults. A document names a pipeline, a grid, a data source
//! (catalog phantom or field file), and the blocks the pipeline needs.

use elastoscope_core::phantom::PhantomId;
use elastoscope_core::recon::descent::OptimizerConfig;
use elastoscope_core::recon::hybrid::HybridConfig;
use elastoscope_core::Grid;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Forward,
    InvertAlgebraic,
    InvertHybrid,
    InvertAdjoint,
    InvertLocal,
    GradientCheck,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Forward => "forward",
            Pipeline::InvertAlgebraic => "invert-algebraic",
            Pipeline::InvertHybrid => "invert-hybrid",
            Pipeline::InvertAdjoint => "invert-adjoint",
            Pipeline::InvertLocal => "invert-local",
            Pipeline::GradientCheck => "gradient-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
            .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))
    }
}

/// Data source: either a catalog phantom solved on a refined grid, or
/// a displacement field loaded from a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<PhantomId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Data generation grid refinement factor, 1 disables.
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Interior margin in physical units; parameters outside it are
    /// pinned to the background.
    #[serde(default = "default_collar")]
    pub collar: f64,
    /// Dirichlet drive on the bottom edge.
    #[serde(default = "default_amplitude")]
    pub amplitude: [f64; 2],
}

fn default_refine() -> usize {
    2
}

fn default_collar() -> f64 {
    0.5
}

fn default_amplitude() -> [f64; 2] {
    [0.3, 0.3]
}

/// Background parameter pair, required when the data comes from a file
/// and the catalog values are not available.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundBlock {
    pub mu: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default = "opt_default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "opt_default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "opt_default_armijo_c")]
    pub armijo_c: f64,
    #[serde(default = "opt_default_delta_init")]
    pub delta_init: f64,
    #[serde(default = "opt_default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "opt_default_smooth_sigma")]
    pub smooth_sigma: f64,
    /// Lower admissible bound for both parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    /// Upper admissible bound for both parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

fn opt_default_epsilon() -> f64 {
    OptimizerConfig::default().epsilon
}

fn opt_default_max_iter() -> usize {
    OptimizerConfig::default().max_iter
}

fn opt_default_armijo_c() -> f64 {
    OptimizerConfig::default().armijo_c
}

fn opt_default_delta_init() -> f64 {
    OptimizerConfig::default().delta_init
}

fn opt_default_delta_min() -> f64 {
    OptimizerConfig::default().delta_min
}

fn opt_default_smooth_sigma() -> f64 {
    OptimizerConfig::default().smooth_sigma
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        OptimizerBlock {
            epsilon: opt_default_epsilon(),
            max_iter: opt_default_max_iter(),
            armijo_c: opt_default_armijo_c(),
            delta_init: opt_default_delta_init(),
            delta_min: opt_default_delta_min(),
            smooth_sigma: opt_default_smooth_sigma(),
            c1: None,
            c2: None,
        }
    }
}

impl OptimizerBlock {
    pub fn to_core(&self) -> OptimizerConfig {
        OptimizerConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            armijo_c: self.armijo_c,
            delta_init: self.delta_init,
            delta_min: self.delta_min,
            smooth_sigma: self.smooth_sigma,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match (self.c1, self.c2) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    #[default]
    Constant,
    Algebraic,
    Hybrid,
}

impl InitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InitMethod::Constant => "constant",
            InitMethod::Algebraic => "algebraic",
            InitMethod::Hybrid => "hybrid",
        }
    }
}

/// Knobs shared by the one-step estimators, used both as standalone
/// pipelines and as descent initializers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitOptions {
    /// Denominator trust floor, relative to the field maximum.
    #[serde(default = "init_default_floor")]
    pub floor: f64,
    /// Probe direction for the pointwise inversion.
    #[serde(default = "init_default_direction")]
    pub direction: [f64; 2],
    /// Feedback passes of the one-step estimate through itself.
    #[serde(default = "init_default_refine_passes")]
    pub refine_passes: usize,
}

fn init_default_floor() -> f64 {
    HybridConfig::default().floor
}

fn init_default_direction() -> [f64; 2] {
    HybridConfig::default().direction
}

fn init_default_refine_passes() -> usize {
    HybridConfig::default().refine_passes
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            floor: init_default_floor(),
            direction: init_default_direction(),
            refine_passes: init_default_refine_passes(),
        }
    }
}

impl InitOptions {
    pub fn to_hybrid(&self) -> HybridConfig {
        HybridConfig {
            floor: self.floor,
            direction: self.direction,
            refine_passes: self.refine_passes,
        }
    }
}

/// Axis-aligned rectangle in physical coordinates, closed on all sides.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub level: f64,
    pub region: RegionBlock,
    /// Defaults to the run seed when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdomainBlock {
    pub i0: usize,
    pub j0: usize,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientCheckBlock {
    #[serde(default = "gc_default_directions")]
    pub directions: usize,
    #[serde(default = "gc_default_step")]
    pub step: f64,
    #[serde(default = "gc_default_tolerance")]
    pub tolerance: f64,
}

fn gc_default_directions() -> usize {
    20
}

fn gc_default_step() -> f64 {
    1e-4
}

fn gc_default_tolerance() -> f64 {
    1e-3
}

impl Default for GradientCheckBlock {
    fn default() -> Self {
        GradientCheckBlock {
            directions: gc_default_directions(),
            step: gc_default_step(),
            tolerance: gc_default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub grid: GridSpec,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub phantom: PhantomBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundBlock>,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub init: InitMethod,
    #[serde(default)]
    pub init_options: InitOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<SubdomainBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_check: Option<GradientCheckBlock>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_frequency() -> f64 {
    70.0
}

fn default_rho() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => {
                ConfigError::Parse(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return bad(format!(
                "grid: need at least 3 nodes per axis, got {}x{}",
                self.grid.nx, self.grid.ny
            ));
        }
        if !(self.grid.lx > 0.0 && self.grid.ly > 0.0) {
            return bad("grid: extents must be positive".into());
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad(format!("frequency_hz must be positive, got {}", self.frequency_hz));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        match (&self.phantom.id, &self.phantom.input) {
            (Some(_), Some(_)) => {
                return bad("phantom: give either id or input, not both".into())
            }
            (None, None) => return bad("phantom: give an id or an input path".into()),
            (Some(_), None) => {
                if self.background.is_some() {
                    return bad(
                        "background: catalog phantoms fix their own background; \
                         remove the block"
                            .into(),
                    );
                }
            }
            (None, Some(_)) => {
                if self.background.is_none() {
                    return bad(
                        "background: required when the data comes from a file".into(),
                    );
                }
            }
        }
        if self.phantom.refine == 0 {
            return bad("phantom.refine must be at least 1".into());
        }
        if !(self.phantom.collar >= 0.0 && self.phantom.collar.is_finite()) {
            return bad("phantom.collar must be nonnegative".into());
        }
        if let Some(b) = &self.background {
            if !(b.mu > 0.0 && b.mu.is_finite() && b.eta > 0.0 && b.eta.is_finite()) {
                return bad("background: mu and eta must be positive".into());
            }
        }
        let o = &self.optimizer;
        if !(o.epsilon > 0.0) || o.max_iter == 0 {
            return bad("optimizer: epsilon must be positive and max_iter nonzero".into());
        }
        if !(o.armijo_c > 0.0 && o.delta_init > 0.0 && o.delta_min > 0.0) {
            return bad("optimizer: armijo_c, delta_init, delta_min must be positive".into());
        }
        if !(o.smooth_sigma >= 0.0) {
            return bad("optimizer: smooth_sigma must be nonnegative".into());
        }
        match (o.c1, o.c2) {
            (Some(a), Some(b)) => {
                if !(a > 0.0 && b > a) {
                    return bad(format!("optimizer: need 0 < c1 < c2, got [{a}, {b}]"));
                }
            }
            (None, None) => {}
            _ => return bad("optimizer: give both c1 and c2 or neither".into()),
        }
        if !(self.init_options.floor > 0.0) {
            return bad("init_options.floor must be positive".into());
        }
        if self.init_options.direction == [0.0, 0.0] {
            return bad("init_options.direction must be nonzero".into());
        }
        if let Some(n) = &self.noise {
            if !(n.level >= 0.0 && n.level < 1.0) {
                return bad(format!("noise.level must lie in [0, 1), got {}", n.level));
            }
            let r = &n.region;
            if !(r.x0 < r.x1 && r.y0 < r.y1) {
                return bad("noise.region must have x0 < x1 and y0 < y1".into());
            }
        }
        if let Some(s) = &self.subdomain {
            if s.nx < 3 || s.ny < 3 {
                return bad("subdomain: need at least 3 nodes per axis".into());
            }
            if s.i0 + s.nx > self.grid.nx || s.j0 + s.ny > self.grid.ny {
                return bad("subdomain does not fit inside the grid".into());
            }
        }
        if self.pipeline == Pipeline::InvertLocal && self.subdomain.is_none() {
            return bad("invert-local requires a subdomain block".into());
        }
        if let Some(g) = &self.gradient_check {
            if g.directions == 0 || !(g.step > 0.0) || !(g.tolerance > 0.0) {
                return bad(
                    "gradient_check: directions, step, tolerance must be positive".into(),
                );
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(pipeline: &str) -> String {
        format!(
            r#"{{
                "pipeline": "{pipeline}",
                "grid": {{"nx": 17, "ny": 17, "lx": 10.0, "ly": 10.0}},
                "phantom": {{"id": "model1"}},
                "output_dir": "out"
            }}"#
        )
    }

    #[test]
    fn minimal_document_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(&minimal("forward")).unwrap();
        assert_eq!(cfg.pipeline, Pipeline::Forward);
        assert_eq!(cfg.frequency_hz, 70.0);
        assert_eq!(cfg.phantom.refine, 2);
        assert_eq!(cfg.optimizer.max_iter, 200);
        assert_eq!(cfg.init, InitMethod::Constant);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let text = minimal("forward").replace("\"seed\"", "\"sede\"");
        let doc = text.replace(
            "\"output_dir\": \"out\"",
            "\"output_dir\": \"out\", \"typo_key\": 1",
        );
        let err = ExperimentConfig::from_json(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("typo_key"), "got: {msg}");
        assert!(msg.contains("line"), "got: {msg}");
    }

    #[test]
    fn source_must_be_exactly_one_of_id_or_input() {
        let both = minimal("forward").replace(
            r#""id": "model1""#,
            r#""id": "model1", "input": "u.csv""#,
        );
        assert!(ExperimentConfig::from_json(&both).is_err());
        let neither = minimal("forward").replace(r#""id": "model1""#, r#""refine": 1"#);
        assert!(ExperimentConfig::from_json(&neither).is_err());
    }

    #[test]
    fn file_source_requires_background() {
        let doc = minimal("forward").replace(r#""id": "model1""#, r#""input": "u.csv""#);
        assert!(ExperimentConfig::from_json(&doc).is_err());
        let with_bg = doc.replace(
            "\"output_dir\": \"out\"",
            "\"output_dir\": \"out\", \"background\": {\"mu\": 4.0e4, \"eta\": 13.0}",
        );
        assert!(ExperimentConfig::from_json(&with_bg).is_ok());
    }

    #[test]
    fn local_pipeline_requires_subdomain() {
        assert!(ExperimentConfig::from_json(&minimal("invert-local")).is_err());
        let doc = minimal("invert-local").replace(
            "\"output_dir\": \"out\"",
            "\"output_dir\": \"out\", \"subdomain\": {\"i0\": 0, \"j0\": 0, \"nx\": 9, \"ny\": 9}",
        );
        assert!(ExperimentConfig::from_json(&doc).is_ok());
    }

    #[test]
    fn bounds_must_come_in_ordered_pairs() {
        let doc = minimal("invert-adjoint").replace(
            "\"output_dir\": \"out\"",
            "\"output_dir\": \"out\", \"optimizer\": {\"c1\": 2.0, \"c2\": 1.0}",
        );
        assert!(ExperimentConfig::from_json(&doc).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_json(&minimal("invert-hybrid")).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.pipeline, cfg.pipeline);
        assert_eq!(back.grid, cfg.grid);
    }
}
