use super::{frames, mc_rows, mean_stderr, Check, EstimatorReport, McConfig};
use crate::dft;
use crate::error::{Error, Result};
use crate::io::Series;
use crate::kernels::{diffusion_matrix, theta_kernel};
use crate::profile::VarianceProfile;
use crate::spectral::{r_of_e, SpectralPoint};
use crate::torus::BandGeometry;
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Moments of the inverse kernel `F^-1[1 / P^]`.
    InverseMoments,
    /// Weighted least squares of `1 / P^` over `|p| <= pi / (2W)`, weights `P^2`.
    WindowWls,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    pub method: FitMethod,
    /// `1 / P^(0)`.
    pub c0: f64,
    /// `r^ c0`.
    pub eta_hat: f64,
    pub r_hat: f64,
    /// Quadratic form of `1 / P^(p) - c0` near `p = 0`.
    pub quad: Vec<Vec<f64>>,
    /// `r(E) Q / W^2`, projected onto the PSD cone.
    pub d_hat: Vec<Vec<f64>>,
    /// RMS of `1/P^ - (c0 + pQp)` over the fit window, relative to `c0`.
    pub residual: f64,
    /// Momenta in the fit window (including `p = 0`).
    pub points: usize,
}

/// Symmetrized `x -> (P(x) + P(-x)) / 2` and its real transform.
fn profile_symbol(geom: &BandGeometry, field: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let lat = geom.lattice();
    if field.len() != lat.n() {
        return Err(Error::DimensionMismatch { expected: lat.n(), got: field.len() });
    }
    let sym: Vec<f64> = (0..lat.n()).map(|i| 0.5 * (field[i] + field[lat.neg_index(i)])).collect();
    let hat: Vec<f64> = dft::forward_real(lat, &sym).into_iter().map(|v| v.re).collect();
    if let Some((k, v)) = hat.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::FitDegenerate(format!("profile transform is not positive at momentum {k}: {v:e}")));
    }
    Ok((sym, hat))
}

fn psd_project(q: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = q.len();
    let m = Mat::<f64>::from_fn(d, d, |i, j| 0.5 * (q[i][j] + q[j][i]));
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::SolveFailure(format!("{e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = (0..d).map(|k| u[(i, k)] * s[k].max(0.0) * u[(j, k)]).sum();
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

fn finish(
    method: FitMethod,
    geom: &BandGeometry,
    hat: &[f64],
    c0: f64,
    quad: Vec<Vec<f64>>,
    r_hat: f64,
    e: f64,
) -> Result<DiffusionFit> {
    let lat = geom.lattice();
    let d = lat.d();
    let w2 = (geom.w() as f64).powi(2);
    let r = r_of_e(e)?;
    let radius = PI / (2.0 * geom.w() as f64) * (1.0 + 1e-12);
    let (mut ss, mut points) = (0.0, 0usize);
    let mut p = vec![0.0; d];
    for (k, &h) in hat.iter().enumerate() {
        lat.momentum_into(k, &mut p);
        if p.iter().map(|v| v * v).sum::<f64>().sqrt() > radius {
            continue;
        }
        let model: f64 = c0 + (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| quad[i][j] * p[i] * p[j]).sum::<f64>();
        ss += (1.0 / h - model).powi(2);
        points += 1;
    }
    let scaled: Vec<Vec<f64>> = quad.iter().map(|row| row.iter().map(|v| r * v / w2).collect()).collect();
    Ok(DiffusionFit {
        method,
        c0,
        eta_hat: r_hat * c0,
        r_hat,
        d_hat: psd_project(&scaled)?,
        quad,
        residual: (ss / points as f64).sqrt() / c0,
        points,
    })
}

/// `c0 = 1/P^(0)` and `Q_ij = -1/2 sum_x x_i x_j K(x)` with `K = F^-1[1/P^]`.
///
/// For `P = |m|^2 (delta + Theta)` the inverse symbol is `eta / Im m + 1 - S^`
/// exactly, so `K = (eta / Im m + 1) delta - f` and `Q = C / 2`.
pub fn fit_inverse_moments(geom: &BandGeometry, field: &[f64], r_hat: f64, e: f64) -> Result<DiffusionFit> {
    let (_, hat) = profile_symbol(geom, field)?;
    let lat = geom.lattice();
    let inv: Vec<C64> = hat.iter().map(|&h| C64::new(1.0 / h, 0.0)).collect();
    let k = dft::inverse(lat, &inv);
    let d = lat.d();
    let mut quad = vec![vec![0.0; d]; d];
    let mut x = vec![0i64; d];
    for (idx, kv) in k.iter().enumerate() {
        lat.site_into(idx, &mut x);
        for i in 0..d {
            for j in 0..d {
                quad[i][j] -= 0.5 * lat.moment_product(&x, i, j) * kv.re;
            }
        }
    }
    finish(FitMethod::InverseMoments, geom, &hat, 1.0 / hat[0], quad, r_hat, e)
}

/// Weighted least squares of `1/P^(p) ~ c0 + p.Q p` over `|p| <= pi/(2W)` with weights `P^(p)^2`.
///
/// Momenta `p` and `-p` carry the same value, so usable momenta are counted
/// modulo sign; fewer than `d(d+1)/2 + 1` is degenerate.
pub fn fit_window_wls(geom: &BandGeometry, field: &[f64], r_hat: f64, e: f64) -> Result<DiffusionFit> {
    let (_, hat) = profile_symbol(geom, field)?;
    let lat = geom.lattice();
    let d = lat.d();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let np = pairs.len() + 1;
    let radius = PI / (2.0 * geom.w() as f64) * (1.0 + 1e-12);
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut classes = 0;
    let mut p = vec![0.0; d];
    for (k, &h) in hat.iter().enumerate() {
        lat.momentum_into(k, &mut p);
        if p.iter().map(|v| v * v).sum::<f64>().sqrt() > radius {
            continue;
        }
        let nk = lat.neg_index(k);
        if k <= nk {
            classes += 1;
        }
        let mut row = vec![1.0];
        row.extend(pairs.iter().map(|&(i, j)| if i == j { p[i] * p[i] } else { 2.0 * p[i] * p[j] }));
        rows.push((row, 1.0 / h, h * h));
    }
    if classes < np {
        return Err(Error::FitDegenerate(format!(
            "{classes} usable momenta (modulo sign) in |p| <= pi/(2W), need {np}"
        )));
    }
    let a = Mat::<f64>::from_fn(np, np, |r, c| rows.iter().map(|(x, _, w)| w * x[r] * x[c]).sum());
    let b: Vec<f64> = (0..np).map(|r| rows.iter().map(|(x, y, w)| w * x[r] * y).sum()).collect();
    let inv = a.partial_piv_lu().inverse();
    let sol: Vec<f64> = (0..np).map(|r| (0..np).map(|c| inv[(r, c)] * b[c]).sum()).collect();
    let scale = (0..np).map(|r| a[(r, r)]).fold(0.0, f64::max) * sol.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let defect =
        (0..np).map(|r| ((0..np).map(|c| a[(r, c)] * sol[c]).sum::<f64>() - b[r]).abs()).fold(0.0, f64::max);
    if sol.iter().any(|v| !v.is_finite()) || defect > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::FitDegenerate(format!("normal equations ill-conditioned (defect {defect:e})")));
    }
    let mut quad = vec![vec![0.0; d]; d];
    for (c, &(i, j)) in pairs.iter().enumerate() {
        quad[i][j] = sol[c + 1];
        quad[j][i] = sol[c + 1];
    }
    finish(FitMethod::WindowWls, geom, &hat, sol[0], quad, r_hat, e)
}

fn max_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let scale = b.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn push_fit(report: &mut EstimatorReport, prefix: &str, fit: &DiffusionFit, err: Option<&DiffusionFit>) {
    let se = |f: &dyn Fn(&DiffusionFit) -> f64| err.map_or(0.0, f);
    report.push_stat(format!("{prefix}.eta_hat"), fit.eta_hat, se(&|e| e.eta_hat));
    report.push_stat(format!("{prefix}.r_hat"), fit.r_hat, se(&|e| e.r_hat));
    report.push_stat(format!("{prefix}.c0"), fit.c0, se(&|e| e.c0));
    let d = fit.d_hat.len();
    for i in 0..d {
        for j in 0..d {
            report.push_stat(format!("{prefix}.D[{i}][{j}]"), fit.d_hat[i][j], se(&|e| e.d_hat[i][j]));
        }
    }
    report.push_stat(format!("{prefix}.residual"), fit.residual, 0.0);
}

/// Noise-free calibration on the Sigma-free prediction `P = |m|^2 (delta + Theta)`
/// with `r^ = Im m`.
pub fn diffusion_calibration(profile: &VarianceProfile, point: &SpectralPoint) -> Result<(DiffusionFit, Vec<Vec<f64>>)> {
    let theta = theta_kernel(profile, point)?;
    let field: Vec<f64> =
        theta.values().iter().enumerate().map(|(i, v)| point.absm2 * (v.re + if i == 0 { 1.0 } else { 0.0 })).collect();
    let fit = fit_inverse_moments(profile.geometry(), &field, point.m.im, point.e())?;
    Ok((fit, diffusion_matrix(profile, point.e())?))
}

/// Fits `(eta^, D^, r^)` from the sampled `E|G_{0x}|^2` at the first point of `cfg`.
///
/// `P(x)` is averaged over samples and translations `G_{y+x, y}`. Standard
/// errors of the fitted parameters are delete-one jackknife estimates.
pub fn diffusion_fit(cfg: &McConfig) -> Result<EstimatorReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    let geom = cfg.geometry;
    let point = cfg.spectral_points()?[0];
    let thouless = (geom.w() as f64 / geom.l() as f64).powi(2);
    if point.eta() < thouless {
        return Err(Error::Precondition(format!(
            "eta = {} is below the Thouless scale W^2/L^2 = {thouless}",
            point.eta()
        )));
    }
    let profile = cfg.build_profile()?;
    let lat = *geom.lattice();
    let n = geom.n();
    let rows = mc_rows(cfg, |sample| {
        let fr = frames(sample, &[point])?;
        let g = fr[0].g();
        let mut out = vec![0.0; n + 2];
        for y in 0..n {
            for x in 0..n {
                out[x] += g.get(lat.add_index(y, x), y).norm_sqr();
            }
            out[n] += g.get(y, y).im;
        }
        out.iter_mut().take(n + 1).for_each(|v| *v /= n as f64);
        out[n + 1] = out[n] / point.eta();
        Ok(out)
    })?;
    let (mean, stderr) = mean_stderr(&rows);
    let fit = fit_inverse_moments(&geom, &mean[..n], mean[n], point.e())?;

    // Delete-one jackknife over samples.
    let s = rows.len();
    let total: Vec<f64> = mean.iter().map(|m| m * s as f64).collect();
    let mut jk: Vec<DiffusionFit> = Vec::with_capacity(s);
    for r in &rows {
        let loo: Vec<f64> = total.iter().zip(r).map(|(t, v)| (t - v) / (s - 1) as f64).collect();
        jk.push(fit_inverse_moments(&geom, &loo[..n], loo[n], point.e())?);
    }
    let jack = |f: &dyn Fn(&DiffusionFit) -> f64| {
        let m = jk.iter().map(|j| f(j)).sum::<f64>() / s as f64;
        ((s - 1) as f64 / s as f64 * jk.iter().map(|j| (f(j) - m).powi(2)).sum::<f64>()).sqrt()
    };
    let d = geom.d();
    let err = DiffusionFit {
        method: fit.method,
        c0: jack(&|f| f.c0),
        eta_hat: jack(&|f| f.eta_hat),
        r_hat: jack(&|f| f.r_hat),
        quad: vec![vec![0.0; d]; d],
        d_hat: (0..d).map(|i| (0..d).map(|j| jack(&|f| f.d_hat[i][j])).collect()).collect(),
        residual: 0.0,
        points: 0,
    };

    let mut report = EstimatorReport::new("diffusion_fit", cfg);
    report.push_stat("mass0", mean[..n].iter().sum(), stderr[..n].iter().map(|v| v * v).sum::<f64>().sqrt());
    report.push_stat("ward_mass", mean[n + 1], stderr[n + 1]);
    push_fit(&mut report, "mc", &fit, Some(&err));
    let target = diffusion_matrix(&profile, point.e())?;
    report.checks.push(Check::at_most("mc.eta_rel_err", (fit.eta_hat - point.eta()).abs() / point.eta(), 0.10));
    report.checks.push(Check::at_most("mc.D_rel_err", max_rel(&fit.d_hat, &target), 0.15));
    match fit_window_wls(&geom, &mean[..n], mean[n], point.e()) {
        Ok(w) => push_fit(&mut report, "mc_window", &w, None),
        Err(e) => report.notes.push(format!("window WLS fit unavailable: {e}")),
    }

    let (cal, target) = diffusion_calibration(&profile, &point)?;
    push_fit(&mut report, "calibration", &cal, None);
    report.checks.push(Check::at_most("calibration.eta_rel_err", (cal.eta_hat - point.eta()).abs() / point.eta(), 0.02));
    report.checks.push(Check::at_most("calibration.D_rel_err", max_rel(&cal.d_hat, &target), 0.02));
    for i in 0..d {
        for j in 0..d {
            report.push_stat(format!("target.D[{i}][{j}]"), target[i][j], 0.0);
        }
    }

    let (_, hat) = profile_symbol(&geom, &mean[..n])?;
    let mut series = Series::new("momentum_profile", "p_norm", "profile");
    for (k, h) in hat.iter().enumerate() {
        series.push(lat.momentum(k).iter().map(|v| v * v).sum::<f64>().sqrt(), *h);
    }
    report.series.push(series);
    report.notes.push(format!("eta^ = r^ c0 with r^ = mean Im G_xx; D^ = r(E) Q / W^2; eta = {}", point.eta()));
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ProfileSpec};
    use crate::spectral::m_sc;

    #[test]
    fn calibration_is_exact_for_inverse_moments() {
        let geom = BandGeometry::new(2, 32, 6).unwrap();
        let profile = build_profile(&ProfileSpec::gaussian(), &geom).unwrap();
        let pt = m_sc(C64::new(0.0, 0.3)).unwrap();
        let (fit, target) = diffusion_calibration(&profile, &pt).unwrap();
        assert!((fit.eta_hat - 0.3).abs() < 1e-10, "{}", fit.eta_hat);
        assert!(max_rel(&fit.d_hat, &target) < 1e-10);
        assert!(fit.d_hat[0][1].abs() < 1e-12);
    }

    #[test]
    fn window_fit_degenerate_at_coarse_resolution() {
        let geom = BandGeometry::new(2, 32, 6).unwrap();
        let profile = build_profile(&ProfileSpec::gaussian(), &geom).unwrap();
        let pt = m_sc(C64::new(0.0, 0.3)).unwrap();
        let theta = theta_kernel(&profile, &pt).unwrap();
        let field: Vec<f64> = theta.values().iter().map(|v| v.re).collect();
        assert!(matches!(fit_window_wls(&geom, &field, pt.m.im, 0.0), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn window_fit_recovers_exact_quadratic() {
        let geom = BandGeometry::new(1, 512, 4).unwrap();
        let lat = geom.lattice();
        let (c0, q) = (0.05, 8.0);
        let sym: Vec<C64> =
            (0..lat.n()).map(|k| C64::new(1.0 / (c0 + q * lat.momentum(k)[0].powi(2)), 0.0)).collect();
        let field: Vec<f64> = dft::inverse(lat, &sym).into_iter().map(|v| v.re).collect();
        let fit = fit_window_wls(&geom, &field, 1.0, 0.0).unwrap();
        assert!((fit.c0 - c0).abs() < 1e-9, "{}", fit.c0);
        assert!((fit.quad[0][0] - q).abs() < 1e-8 * q, "{:?}", fit.quad);
        assert!((fit.d_hat[0][0] - q / 16.0).abs() < 1e-8);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn window_fit_sees_quartic_bias_on_theta() {
        let geom = BandGeometry::new(1, 512, 4).unwrap();
        let profile = build_profile(&ProfileSpec::gaussian(), &geom).unwrap();
        let pt = m_sc(C64::new(0.0, 0.05)).unwrap();
        let theta = theta_kernel(&profile, &pt).unwrap();
        let field: Vec<f64> =
            theta.values().iter().enumerate().map(|(i, v)| pt.absm2 * (v.re + if i == 0 { 1.0 } else { 0.0 })).collect();
        let window = fit_window_wls(&geom, &field, pt.m.im, 0.0).unwrap();
        let moments = fit_inverse_moments(&geom, &field, pt.m.im, 0.0).unwrap();
        assert!((moments.eta_hat - 0.05).abs() < 1e-10);
        // 1 - psi(Wp) is far from quadratic at |p| = pi/(2W); the window fit absorbs the quartic term.
        assert!((window.eta_hat - 0.05).abs() > 0.05 * 0.05, "{}", window.eta_hat);
    }
}
