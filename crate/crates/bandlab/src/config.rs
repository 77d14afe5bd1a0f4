//! Run configuration: JSON, schema version 1, unknown keys rejected.
//!
//! Errors carry the offending key path, e.g. `spectral.eta[1]`.

use crate::error::{Error, Result};
use crate::experiments::{self, EstimatorReport, McConfig};
use crate::graphcalc::{CatalogTag, EvalBudget};
use crate::profile::ProfileSpec;
use crate::torus::BandGeometry;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// The published JSON Schema for [`RunConfig`].
pub const RUN_CONFIG_SCHEMA: &str = include_str!("../schema/run_config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBlock {
    #[serde(rename = "E")]
    pub e: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    ResidualT2,
    ResidualT3,
    DiffusionFit,
    LocalLaw,
    RwGaussian,
    OverlapScan,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::ResidualT2 => "residual_t2",
            Estimator::ResidualT3 => "residual_t3",
            Estimator::DiffusionFit => "diffusion_fit",
            Estimator::LocalLaw => "local_law",
            Estimator::RwGaussian => "rw_gaussian",
            Estimator::OverlapScan => "overlap_scan",
        }
    }
}

fn default_samples() -> usize {
    100
}
fn default_pairs() -> usize {
    10
}
fn default_tau() -> f64 {
    0.5
}
fn default_rw_steps() -> usize {
    100
}
fn default_rw_window() -> f64 {
    3.0
}
fn default_radii() -> Vec<usize> {
    vec![0, 1, 2, 4]
}
fn default_catalogs() -> Vec<CatalogTag> {
    vec![CatalogTag::A2, CatalogTag::A3, CatalogTag::E6]
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::ResidualT2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub budget: EvalBudget,
    /// Local-law threshold exponent.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_rw_steps")]
    pub rw_steps: usize,
    /// Window `|x| <= rw_window sqrt(n) W`.
    #[serde(default = "default_rw_window")]
    pub rw_window: f64,
    #[serde(default = "default_radii")]
    pub overlap_radii: Vec<usize>,
    #[serde(default = "default_catalogs")]
    pub catalogs: Vec<CatalogTag>,
    /// Extra graph file (`{schema_version, graphs}`) for the `graphs` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphs: Option<PathBuf>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Plotdata]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub profile: ProfileSpec,
    pub spectral: SpectralBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn at(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Config { path: path.into(), message: message.to_string() }
}

impl RunConfig {
    /// Parses and validates; no computation happens before this succeeds.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            at(path, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn geometry(&self) -> Result<BandGeometry> {
        let g = &self.geometry;
        BandGeometry::new(g.d, g.l, g.w).map_err(|e| at("geometry", e))
    }

    /// Every `E + i eta` of the spectral block, `E` outer.
    pub fn points(&self) -> Vec<C64> {
        self.spectral.e.iter().flat_map(|&e| self.spectral.eta.iter().map(move |&eta| C64::new(e, eta))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(at(
                "schema_version",
                format!("unsupported version {} (expected {CONFIG_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.geometry()?;
        self.profile.validate().map_err(|e| at("profile", e))?;
        if self.spectral.e.is_empty() {
            return Err(at("spectral.E", "needs at least one energy"));
        }
        if self.spectral.eta.is_empty() {
            return Err(at("spectral.eta", "needs at least one eta"));
        }
        for (i, e) in self.spectral.e.iter().enumerate() {
            if !(e.abs() < 2.0) {
                return Err(at(format!("spectral.E[{i}]"), format!("{e} is outside the bulk (-2, 2)")));
            }
        }
        for (i, eta) in self.spectral.eta.iter().enumerate() {
            if !(*eta > 0.0 && eta.is_finite()) {
                return Err(at(format!("spectral.eta[{i}]"), format!("{eta} must be positive and finite")));
            }
        }
        let x = &self.experiment;
        if x.samples < 2 {
            return Err(at("experiment.samples", format!("{} < 2", x.samples)));
        }
        if x.pairs == 0 {
            return Err(at("experiment.pairs", "must be at least 1"));
        }
        if !(x.tau > 0.0 && x.tau.is_finite()) {
            return Err(at("experiment.tau", format!("{} must be positive", x.tau)));
        }
        if x.rw_steps == 0 {
            return Err(at("experiment.rw_steps", "must be at least 1"));
        }
        if !(x.rw_window > 0.0 && x.rw_window.is_finite()) {
            return Err(at("experiment.rw_window", format!("{} must be positive", x.rw_window)));
        }
        if x.overlap_radii.is_empty() {
            return Err(at("experiment.overlap_radii", "needs at least one radius"));
        }
        if x.budget.max_internal == 0 || x.budget.max_work == 0 {
            return Err(at("experiment.budget", "limits must be positive"));
        }
        if self.output.formats.is_empty() {
            return Err(at("output.formats", "needs at least one format"));
        }
        Ok(())
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        let x = &self.experiment;
        let mut c = McConfig::new(self.geometry()?, self.profile.clone(), self.points())
            .samples(x.samples)
            .seed(x.seed)
            .pairs(x.pairs)
            .budget(x.budget);
        c.tau = x.tau;
        Ok(c)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// Runs one estimator with the experiment settings of this config.
    pub fn run(&self, est: Estimator) -> Result<EstimatorReport> {
        let cfg = self.mc_config()?;
        let x = &self.experiment;
        match est {
            Estimator::ResidualT2 => experiments::residual_t2(&cfg),
            Estimator::ResidualT3 => experiments::residual_t3(&cfg),
            Estimator::DiffusionFit => experiments::diffusion_fit(&cfg),
            Estimator::LocalLaw => experiments::local_law_stats(&cfg),
            Estimator::RwGaussian => experiments::rw_report(&cfg, x.rw_steps, x.rw_window),
            Estimator::OverlapScan => experiments::overlap_norm_scan(&cfg, &x.overlap_radii),
        }
    }
}
