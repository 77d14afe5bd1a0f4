//! Monte Carlo estimators and statistical checks against the deterministic kernels.
//!
//! Every estimator draws sample `s` of a run from the independent stream
//! `(seed, s)`, evaluates it at all spectral points of the config (common
//! random numbers across `z`), and reduces per-sample values in sample order,
//! so reports are bit-identical for a fixed `(config, seed)` regardless of the
//! thread count.

mod diffusion;
mod identities;
mod lawstats;
mod residual;

pub use diffusion::{diffusion_calibration, diffusion_fit, fit_inverse_moments, fit_window_wls, DiffusionFit, FitMethod};
pub use identities::exact_checks;
pub use lawstats::{local_law_stats, overlap_norm_scan, rw_gaussian, rw_report, RwReport, RW_TOL};
pub use residual::{residual_t2, residual_t3, residual_with_graphs, sample_pairs, Z_THRESHOLD};

use crate::ensemble::{resolvent, sample_stream, BandMatrixSample, ResolventFrame};
use crate::error::{Error, Result};
use crate::graphcalc::EvalBudget;
use crate::io::{Cell, Series, Table};
use crate::profile::{build_profile, ProfileSpec, VarianceProfile};
use crate::spectral::{m_sc, SpectralPoint};
use crate::torus::BandGeometry;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub geometry: BandGeometry,
    pub profile: ProfileSpec,
    pub points: Vec<C64>,
    pub samples: usize,
    pub seed: u64,
    /// Number of random `(a, b)` pairs for the residual estimators.
    pub pairs: usize,
    pub budget: EvalBudget,
    /// Exponent of the local-law threshold `W^tau`.
    pub tau: f64,
}

impl McConfig {
    pub fn new(geometry: BandGeometry, profile: ProfileSpec, points: Vec<C64>) -> Self {
        Self { geometry, profile, points, samples: 100, seed: 0, pairs: 10, budget: EvalBudget::default(), tau: 0.5 }
    }

    pub fn samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn pairs(mut self, n: usize) -> Self {
        self.pairs = n;
        self
    }

    pub fn budget(mut self, b: EvalBudget) -> Self {
        self.budget = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", self.samples)));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("no spectral points".into()));
        }
        for z in &self.points {
            if !(z.re.abs() < 2.0) || !(z.im > 0.0) || !z.im.is_finite() {
                return Err(Error::OutsideBulk(format!("Monte Carlo points need |E| < 2 and eta > 0, got {z}")));
            }
        }
        self.profile.validate()
    }

    pub fn spectral_points(&self) -> Result<Vec<SpectralPoint>> {
        self.points.iter().map(|&z| m_sc(z)).collect()
    }

    pub fn build_profile(&self) -> Result<Arc<VarianceProfile>> {
        Ok(Arc::new(build_profile(&self.profile, &self.geometry)?))
    }

    /// First 16 hex digits of the SHA-256 of the JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stat {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorReport {
    pub estimator: String,
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub runtime_seconds: f64,
    pub stats: Vec<Stat>,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
}

impl EstimatorReport {
    pub fn new(estimator: &str, cfg: &McConfig) -> Self {
        Self {
            estimator: estimator.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            samples: cfg.samples,
            runtime_seconds: 0.0,
            stats: vec![],
            checks: vec![],
            series: vec![],
            notes: vec![],
        }
    }

    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push_stat(&mut self, name: impl Into<String>, mean: f64, stderr: f64) {
        self.stats.push(Stat { name: name.into(), mean, stderr });
    }

    pub fn stats_table(&self) -> Table {
        let mut t = Table::new(["name", "mean", "stderr"])
            .meta("estimator", &self.estimator)
            .meta("config", &self.config_hash)
            .meta("seed", self.seed)
            .meta("samples", self.samples);
        for s in &self.stats {
            t.rows.push(vec![Cell::Text(s.name.clone()), Cell::Num(s.mean), Cell::Num(s.stderr)]);
        }
        t
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(["name", "value", "threshold", "pass"]).meta("estimator", &self.estimator);
        for c in &self.checks {
            t.rows.push(vec![
                Cell::Text(c.name.clone()),
                Cell::Num(c.value),
                Cell::Num(c.threshold),
                Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
            ]);
        }
        t
    }
}

/// Per-sample value rows, in sample order.
pub(crate) fn mc_rows<F>(cfg: &McConfig, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&Arc<BandMatrixSample>) -> Result<Vec<f64>> + Sync,
{
    cfg.validate()?;
    let profile = cfg.build_profile()?;
    let rows: Vec<Vec<f64>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| f(&Arc::new(sample_stream(&profile, cfg.seed, s)?)))
        .collect::<Result<_>>()?;
    let width = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch { expected: width, got: r.len() });
    }
    Ok(rows)
}

/// Sample mean and standard error `sqrt(var / n)` of each column, summed in row order.
pub fn mean_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let stderr = var.iter().map(|s| if n > 1 { (s / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 }).collect();
    (mean, stderr)
}

/// Mean and standard error of each named field of `estimator` over the samples of `cfg`.
pub fn mc_expect<F>(cfg: &McConfig, name: &str, fields: &[String], estimator: F) -> Result<EstimatorReport>
where
    F: Fn(&Arc<BandMatrixSample>) -> Result<Vec<f64>> + Sync,
{
    let t0 = Instant::now();
    let rows = mc_rows(cfg, |s| {
        let v = estimator(s)?;
        if v.len() != fields.len() {
            return Err(Error::DimensionMismatch { expected: fields.len(), got: v.len() });
        }
        Ok(v)
    })?;
    let (mean, stderr) = mean_stderr(&rows);
    let mut report = EstimatorReport::new(name, cfg);
    for ((f, m), e) in fields.iter().zip(mean).zip(stderr) {
        report.push_stat(f.clone(), m, e);
    }
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}

/// Frames of one sample at every point of the config.
pub fn frames(sample: &Arc<BandMatrixSample>, points: &[SpectralPoint]) -> Result<Vec<ResolventFrame>> {
    points.iter().map(|p| resolvent(sample, p.z)).collect()
}

/// `|mean| / stderr` for a complex statistic; zero when both vanish.
pub fn complex_z_score(re: &Stat, im: &Stat) -> f64 {
    let m = re.mean.hypot(im.mean);
    let s = re.stderr.hypot(im.stderr);
    if m == 0.0 {
        0.0
    } else {
        m / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> McConfig {
        let g = BandGeometry::new(1, 8, 2).unwrap();
        McConfig::new(g, ProfileSpec::gaussian(), vec![C64::new(0.1, 0.5)]).samples(16).seed(3)
    }

    #[test]
    fn constant_estimator() {
        let r = mc_expect(&cfg(), "one", &["one".into()], |_| Ok(vec![1.0])).unwrap();
        assert_eq!(r.stats[0].mean, 1.0);
        assert_eq!(r.stats[0].stderr, 0.0);
    }

    #[test]
    fn reproducible_and_validated() {
        let f = |s: &Arc<BandMatrixSample>| Ok(vec![s.h().get(0, 1).re, s.h().get(2, 2).re]);
        let names = ["a".to_string(), "b".to_string()];
        let a = mc_expect(&cfg(), "h", &names, f).unwrap();
        let b = mc_expect(&cfg(), "h", &names, f).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, cfg().seed(4).hash());
        assert!(mc_expect(&cfg().samples(1), "h", &names, f).is_err());
        let mut bad = cfg();
        bad.points = vec![C64::new(0.0, 0.0)];
        assert!(matches!(bad.validate(), Err(Error::OutsideBulk(_))));
        assert!(mc_expect(&cfg(), "h", &names[..1], f).is_err());
    }

    #[test]
    fn stderr_formula() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let (m, s) = mean_stderr(&rows);
        assert_eq!(m[0], 2.5);
        // var = 5/3, stderr = sqrt(5/12)
        assert!((s[0] - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
