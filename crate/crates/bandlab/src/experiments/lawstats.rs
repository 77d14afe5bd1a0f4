use super::{frames, mc_rows, mean_stderr, Check, EstimatorReport, McConfig};
use crate::dft;
use crate::ensemble::{hermitian_eigenvalues, overlap_matrix};
use crate::error::{Error, Result};
use crate::io::Series;
use crate::kernels::b_field;
use crate::profile::VarianceProfile;
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Log-spaced histogram bins: `BINS_PER_DECADE` per decade over `[10^LO, 10^HI)`,
/// plus an underflow and an overflow bin.
const BINS_PER_DECADE: usize = 100;
const LO: i32 = -16;
const HI: i32 = 8;
const NBINS: usize = (HI - LO) as usize * BINS_PER_DECADE + 2;

fn bin_of(v: f64) -> usize {
    if !(v > 0.0) {
        return 0;
    }
    let t = (v.log10() - LO as f64) * BINS_PER_DECADE as f64;
    if t < 0.0 {
        0
    } else {
        ((t.floor() as usize) + 1).min(NBINS - 1)
    }
}

/// Upper edge of bin `k`.
fn bin_upper(k: usize) -> f64 {
    if k == NBINS - 1 {
        return f64::INFINITY;
    }
    10f64.powf(LO as f64 + k as f64 / BINS_PER_DECADE as f64)
}

/// Smallest bin upper edge below which at least a fraction `q` of the mass lies.
fn quantile(hist: &[f64], q: f64) -> f64 {
    let total: f64 = hist.iter().sum();
    let mut acc = 0.0;
    for (k, h) in hist.iter().enumerate() {
        acc += h;
        if acc >= q * total {
            return bin_upper(k);
        }
    }
    f64::INFINITY
}

/// Quantiles of `|G_xy - m delta_xy|^2 / B_xy` over all off-diagonal pairs and
/// samples, and of `|G_xx - m|`, at the first point of `cfg`.
///
/// Quantiles come from pooled log-spaced histograms (100 bins per decade) and
/// are reported as the bin upper edge, so they overestimate by at most 2.3%.
pub fn local_law_stats(cfg: &McConfig) -> Result<EstimatorReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    let point = cfg.spectral_points()?[0];
    let geom = cfg.geometry;
    let (n, lat) = (geom.n(), *geom.lattice());
    let b = b_field(&geom);
    let rows = mc_rows(cfg, |sample| {
        let g = frames(sample, &[point])?.remove(0);
        let g = g.g();
        let mut out = vec![0.0; 2 * NBINS + 3];
        let (mut ratio_sum, mut diag_sum, mut ratio_max): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    let dv = (g.get(x, x) - point.m).norm();
                    out[NBINS + bin_of(dv)] += 1.0;
                    diag_sum += dv;
                } else {
                    let r = g.get(x, y).norm_sqr() / b.values()[lat.sub_index(y, x)].re;
                    out[bin_of(r)] += 1.0;
                    ratio_sum += r;
                    ratio_max = ratio_max.max(r);
                }
            }
        }
        out[2 * NBINS] = ratio_sum / (n * (n - 1)).max(1) as f64;
        out[2 * NBINS + 1] = diag_sum / n as f64;
        out[2 * NBINS + 2] = ratio_max;
        Ok(out)
    })?;
    let (mean, stderr) = mean_stderr(&rows);
    let (ratio_hist, diag_hist) = (&mean[..NBINS], &mean[NBINS..2 * NBINS]);
    let mut report = EstimatorReport::new("local_law", cfg);
    for q in [0.5, 0.9, 0.99] {
        report.push_stat(format!("ratio.q{}", (q * 100.0) as u32), quantile(ratio_hist, q), 0.0);
    }
    let worst = rows.iter().map(|r| r[2 * NBINS + 2]).fold(0.0, f64::max);
    report.push_stat("ratio.max", worst, 0.0);
    report.push_stat("ratio.mean", mean[2 * NBINS], stderr[2 * NBINS]);
    report.push_stat("diag.median", quantile(diag_hist, 0.5), 0.0);
    report.push_stat("diag.mean", mean[2 * NBINS + 1], stderr[2 * NBINS + 1]);
    let w = geom.w() as f64;
    report.checks.push(Check::at_most("ratio.q99", quantile(ratio_hist, 0.99), w.powf(cfg.tau)));
    report.checks.push(Check::at_most("diag.median", quantile(diag_hist, 0.5), 3.0 * w.powf(-(geom.d() as f64) / 2.0)));
    for (name, hist) in [("ratio_histogram", ratio_hist), ("diag_histogram", diag_hist)] {
        let mut s = Series::new(name, "bin_upper", "fraction");
        let total: f64 = hist.iter().sum();
        for (k, h) in hist.iter().enumerate().take(NBINS - 1) {
            if *h > 0.0 {
                s.push(bin_upper(k), h / total);
            }
        }
        report.series.push(s);
    }
    report.notes.push(format!("threshold W^tau with tau = {} is an artifact default", cfg.tau));
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwReport {
    pub steps: usize,
    /// `(S^n)_{0x}` in site order.
    pub walk: Vec<f64>,
    /// Gaussian density with covariance `n C` at each site.
    pub gaussian: Vec<f64>,
    /// Second-moment matrix of `S^n`.
    pub covariance: Vec<Vec<f64>>,
    /// `n C`.
    pub target_covariance: Vec<Vec<f64>>,
    /// Sup of `|walk / gaussian - 1|` over `|x| <= window sqrt(n) W`.
    pub sup_rel_error: f64,
    /// Gaussian mass outside the fundamental domain.
    pub wraparound: f64,
}

/// Gaussian mass of the lattice marginal with variance `v` beyond `|k| > half`.
fn tail_mass_1d(v: f64, half: i64) -> f64 {
    let norm: f64 = 1.0 / (2.0 * PI * v).sqrt();
    let mut acc = 0.0;
    let mut k = half + 1;
    loop {
        let t = norm * (-(k * k) as f64 / (2.0 * v)).exp();
        acc += 2.0 * t;
        if t < 1e-30 || k > half + 1_000_000 {
            break;
        }
        k += 1;
    }
    acc
}

pub const WRAPAROUND_LIMIT: f64 = 1e-8;

/// `(S^n)_{0x}` by powering the symbol, against the Gaussian density with
/// covariance `n C` inside `|x| <= window sqrt(n) W`.
pub fn rw_gaussian(profile: &VarianceProfile, n: usize, window: f64) -> Result<RwReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("walk length n must be at least 1".into()));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidArgument(format!("window multiplier must be positive, got {window}")));
    }
    let geom = profile.geometry();
    let lat = geom.lattice();
    let d = lat.d();
    let c = profile.second_moments();
    let cov: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| v * n as f64).collect()).collect();
    let half = (lat.l() / 2) as i64 - if lat.l() % 2 == 0 { 1 } else { 0 };
    let wraparound: f64 = (0..d).map(|i| tail_mass_1d(cov[i][i], half)).sum();
    if !(wraparound <= WRAPAROUND_LIMIT) {
        return Err(Error::WraparoundMass { mass: wraparound, limit: WRAPAROUND_LIMIT });
    }

    let walk: Vec<f64> = if n == 1 {
        profile.field().to_vec()
    } else {
        let sym: Vec<C64> = profile.symbol().iter().map(|&s| C64::new(s.powi(n as i32), 0.0)).collect();
        dft::inverse(lat, &sym).into_iter().map(|v| v.re).collect()
    };

    let m = Mat::<f64>::from_fn(d, d, |i, j| cov[i][j]);
    let inv = m.partial_piv_lu().inverse();
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::SolveFailure(format!("covariance is not positive definite (det {det:e})")));
    }
    let norm = 1.0 / ((2.0 * PI).powi(d as i32) * det).sqrt();
    let radius = window * (n as f64).sqrt() * geom.w() as f64;
    let mut x = vec![0i64; d];
    let mut gaussian = Vec::with_capacity(lat.n());
    let mut covariance = vec![vec![0.0; d]; d];
    let mut sup: f64 = 0.0;
    for (idx, &wv) in walk.iter().enumerate() {
        lat.site_into(idx, &mut x);
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] as f64 * inv[(i, j)] * x[j] as f64;
                covariance[i][j] += lat.moment_product(&x, i, j) * wv;
            }
        }
        let gv = norm * (-0.5 * q).exp();
        gaussian.push(gv);
        if lat.euclid2_index(idx).sqrt() <= radius {
            sup = sup.max((wv / gv - 1.0).abs());
        }
    }
    Ok(RwReport { steps: n, walk, gaussian, covariance, target_covariance: cov, sup_rel_error: sup, wraparound })
}

/// Sup relative error allowed between the walk and its Gaussian approximation.
pub const RW_TOL: f64 = 0.10;

/// [`rw_gaussian`] on the profile of `cfg` as a report: covariance and
/// sup-error checks, plus walk and Gaussian along the first axis.
pub fn rw_report(cfg: &McConfig, n: usize, window: f64) -> Result<EstimatorReport> {
    let t0 = Instant::now();
    cfg.profile.validate()?;
    let profile = cfg.build_profile()?;
    let rw = rw_gaussian(&profile, n, window)?;
    let mut report = EstimatorReport::new("rw_gaussian", cfg);
    report.samples = 0;
    let d = rw.covariance.len();
    let mut cov_err: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (a, b) = (rw.covariance[i][j], rw.target_covariance[i][j]);
            report.push_stat(format!("covariance[{i}][{j}]"), a, 0.0);
            cov_err = cov_err.max((a - b).abs() / rw.target_covariance[i][i]);
        }
    }
    report.push_stat("sup_rel_error", rw.sup_rel_error, 0.0);
    report.push_stat("wraparound", rw.wraparound, 0.0);
    report.checks.push(Check::at_most("covariance_rel_err", cov_err, 1e-8));
    report.checks.push(Check::at_most("sup_rel_error", rw.sup_rel_error, RW_TOL));
    let lat = profile.geometry().lattice();
    let mut walk = Series::new("walk_axis", "x", "walk");
    let mut gauss = Series::new("gaussian_axis", "x", "gaussian");
    let mut x = vec![0i64; d];
    for (i, (w, g)) in rw.walk.iter().zip(&rw.gaussian).enumerate() {
        lat.site_into(i, &mut x);
        if x[1..].iter().all(|&c| c == 0) {
            walk.push(x[0] as f64, *w);
            gauss.push(x[0] as f64, *g);
        }
    }
    report.series.extend([walk, gauss]);
    report.notes.push(format!("n={n}, window {window} sqrt(n) W"));
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}

/// Sites within torus distance `k` of the origin, in index order.
fn ball(geom: &crate::torus::BandGeometry, k: usize) -> Vec<usize> {
    let lat = geom.lattice();
    (0..lat.n()).filter(|&i| lat.norm_index(i) <= k as u64).collect()
}

pub const OVERLAP_TOL: f64 = 1e-10;

/// Mean operator norm of the overlap matrix on balls of radius `K` at the first point of `cfg`.
///
/// Also checks on every frame that the matrix is PSD with unit diagonal and
/// that norms do not decrease along the nested balls.
pub fn overlap_norm_scan(cfg: &McConfig, radii: &[usize]) -> Result<EstimatorReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    let point = cfg.spectral_points()?[0];
    let geom = cfg.geometry;
    let mut sorted = radii.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let sets: Vec<Vec<usize>> = sorted.iter().map(|&k| ball(&geom, k)).collect();
    let nk = sets.len();
    let rows = mc_rows(cfg, |sample| {
        let frame = frames(sample, &[point])?.remove(0);
        let mut out = vec![0.0; nk + 3];
        let (mut min_eig, mut diag_dev, mut drops): (f64, f64, f64) = (f64::INFINITY, 0.0, 0.0);
        for (k, set) in sets.iter().enumerate() {
            let a = overlap_matrix(&frame, set)?;
            for i in 0..a.n() {
                diag_dev = diag_dev.max((a.get(i, i) - 1.0).norm());
            }
            let ev = hermitian_eigenvalues(&a)?;
            min_eig = min_eig.min(ev[0] / ev[ev.len() - 1].max(1.0));
            out[k] = ev[ev.len() - 1];
            if k > 0 && out[k] < out[k - 1] * (1.0 - 1e-12) {
                drops += 1.0;
            }
        }
        out[nk] = min_eig;
        out[nk + 1] = diag_dev;
        out[nk + 2] = drops;
        Ok(out)
    })?;
    let (mean, stderr) = mean_stderr(&rows);
    let mut report = EstimatorReport::new("overlap_scan", cfg);
    let w4 = (geom.w() as f64).powi(4);
    let mut shape = Series::new("overlap_norm", "K", "mean_norm");
    for (k, &r) in sorted.iter().enumerate() {
        report.push_stat(format!("norm[K={r}]"), mean[k], stderr[k]);
        report.push_stat(format!("K4/W4[K={r}]"), (r as f64).powi(4) / w4, 0.0);
        shape.push(r as f64, mean[k]);
    }
    report.series.push(shape);
    let min_eig = rows.iter().map(|r| r[nk]).fold(f64::INFINITY, f64::min);
    let diag = rows.iter().map(|r| r[nk + 1]).fold(0.0, f64::max);
    let drops: f64 = rows.iter().map(|r| r[nk + 2]).sum();
    report.checks.push(Check::at_most("psd.min_relative_eigenvalue", -min_eig, OVERLAP_TOL));
    report.checks.push(Check::at_most("unit_diagonal", diag, OVERLAP_TOL));
    report.checks.push(Check::at_most("norm_decreases", drops, 0.0));
    if sorted[0] == 0 {
        let worst = rows.iter().map(|r| (r[0] - 1.0).abs()).fold(0.0, f64::max);
        report.checks.push(Check::at_most("single_site_norm", worst, 4.0 * f64::EPSILON));
    }
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}
