use crate::error::{Error, Result};
use crate::kernels::{KernelKind, LatticeKernel, SelfEnergyKernel};
use crate::profile::VarianceProfile;
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// `E - (sum_x E_0x) f`: subtracts the row sum along the variance profile.
pub fn renormalize_self_energy(e: &SelfEnergyKernel, profile: &VarianceProfile) -> Result<SelfEnergyKernel> {
    let geom = e.kernel.geometry();
    if geom != profile.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "self-energy on (d={}, L={}, W={}) vs profile on (d={}, L={}, W={})",
            geom.d(),
            geom.l(),
            geom.w(),
            profile.geometry().d(),
            profile.geometry().l(),
            profile.geometry().w()
        )));
    }
    let total = e.kernel.row_sum();
    let vals: Vec<C64> = e.kernel.values().iter().zip(profile.field()).map(|(&v, &f)| v - total * f).collect();
    let k = LatticeKernel::from_values(geom, KernelKind::SelfEnergy, vals, e.kernel.point().copied())?;
    SelfEnergyKernel::new(k, e.order, e.label.clone())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelfEnergySymbol {
    /// Transform `sum_x E_0x e^{ipx}` over all momenta, index order.
    pub symbol: Vec<C64>,
    /// Value at `p = 0`.
    pub c0: f64,
    /// Fitted symmetric quadratic form: `Re E^(p) ~ c0 + p.Q p`.
    pub quad: Vec<Vec<f64>>,
    /// Momenta used in the fit.
    pub points: usize,
}

impl SelfEnergySymbol {
    pub fn model(&self, p: &[f64]) -> f64 {
        let mut v = self.c0;
        for i in 0..p.len() {
            for j in 0..p.len() {
                v += self.quad[i][j] * p[i] * p[j];
            }
        }
        v
    }
}

/// Symbol of `E` plus a quadratic fit of its real part over `0 < |p| <= pi / (4W)`.
///
/// `c0` is pinned to the exact value at `p = 0`; residuals are weighted by
/// `|p|^-8`, the inverse square of the quartic truncation error, so the fit
/// tracks the small-momentum expansion rather than the window edge.
pub fn self_energy_symbol(e: &SelfEnergyKernel) -> Result<SelfEnergySymbol> {
    let geom = e.kernel.geometry();
    let lat = geom.lattice();
    let d = geom.d();
    let radius = std::f64::consts::PI / (4.0 * geom.w() as f64);
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let np = pairs.len();

    let symbol = e.kernel.symbol().to_vec();
    let c0 = symbol[0].re;
    let pmin = 2.0 * std::f64::consts::PI / geom.l() as f64;
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut p = vec![0.0; d];
    for (idx, s) in symbol.iter().enumerate().skip(1) {
        lat.momentum_into(idx, &mut p);
        let norm = p.iter().map(|q| q * q).sum::<f64>().sqrt();
        if norm > radius * (1.0 + 1e-12) {
            continue;
        }
        let row = pairs.iter().map(|&(i, j)| if i == j { p[i] * p[i] } else { 2.0 * p[i] * p[j] }).collect();
        rows.push((row, s.re - c0, (pmin / norm).powi(8)));
    }
    if rows.len() < np + 1 {
        return Err(Error::FitDegenerate(format!(
            "{} nonzero momenta in |p| <= {radius:.4} for {np} quadratic coefficients",
            rows.len()
        )));
    }
    for (c, &(i, j)) in pairs.iter().enumerate() {
        if rows.iter().all(|(r, _, _)| r[c] == 0.0) {
            return Err(Error::FitDegenerate(format!("no momentum in the window resolves p_{i} p_{j}")));
        }
    }
    let a = Mat::<f64>::from_fn(np, np, |r, c| rows.iter().map(|(row, _, w)| w * row[r] * row[c]).sum());
    let b: Vec<f64> = (0..np).map(|r| rows.iter().map(|(row, y, w)| w * row[r] * y).sum()).collect();
    let inv = a.partial_piv_lu().inverse();
    let x: Vec<f64> = (0..np).map(|r| (0..np).map(|c| inv[(r, c)] * b[c]).sum()).collect();
    let scale = (0..np).map(|r| a[(r, r)]).fold(0.0, f64::max) * x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let defect = (0..np)
        .map(|r| ((0..np).map(|c| a[(r, c)] * x[c]).sum::<f64>() - b[r]).abs())
        .fold(0.0, f64::max);
    if x.iter().any(|v| !v.is_finite()) || defect > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::FitDegenerate(format!("normal equations ill-conditioned (defect {defect:e})")));
    }
    let mut quad = vec![vec![0.0; d]; d];
    for (c, &(i, j)) in pairs.iter().enumerate() {
        quad[i][j] = x[c];
        quad[j][i] = x[c];
    }
    Ok(SelfEnergySymbol { symbol, c0, quad, points: rows.len() + 1 })
}
