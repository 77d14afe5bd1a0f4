//! Gaussian band matrices, their resolvents, and per-realization identities.

use crate::error::{Error, Result};
use crate::profile::VarianceProfile;
use crate::spectral::SpectralPoint;
use crate::torus::BandGeometry;
use crate::window::{ball_max, ball_sum};
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const RESOLVENT_CAP: usize = 6000;
pub const EIGEN_CAP: usize = 3000;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    fn from_faer(m: &Mat<C64>) -> Self {
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
        Self { n, data }
    }
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug)]
pub struct BandMatrixSample {
    profile: Arc<VarianceProfile>,
    h: CMatrix,
    seed: u64,
    stream: u64,
}

impl BandMatrixSample {
    /// Wraps a given Hermitian matrix, e.g. a synthetic one.
    pub fn from_matrix(profile: Arc<VarianceProfile>, h: CMatrix, seed: u64) -> Result<Self> {
        let n = profile.geometry().n();
        if h.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: h.n() });
        }
        for i in 0..n {
            for j in i..n {
                if h.get(i, j) != h.get(j, i).conj() {
                    return Err(Error::InvalidArgument(format!("H is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(Self { profile, h, seed, stream: 0 })
    }

    pub fn profile(&self) -> &Arc<VarianceProfile> {
        &self.profile
    }

    pub fn geometry(&self) -> &BandGeometry {
        self.profile.geometry()
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    Ok(())
}

/// `sample_stream(profile, seed, 0)`.
pub fn sample_h(profile: &Arc<VarianceProfile>, seed: u64) -> Result<BandMatrixSample> {
    sample_stream(profile, seed, 0)
}

/// Sample number `stream` of the run with base `seed`; each stream is an
/// independent ChaCha8 sequence, so samples can be drawn in any order.
pub fn sample_stream(profile: &Arc<VarianceProfile>, seed: u64, stream: u64) -> Result<BandMatrixSample> {
    let n = profile.geometry().n();
    check_cap(n, RESOLVENT_CAP)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut h = CMatrix::zeros(n);
    for x in 0..n {
        for y in x..n {
            let s = profile.s(x, y);
            let v = if x == y {
                let g: f64 = StandardNormal.sample(&mut rng);
                C64::new(g * s.sqrt(), 0.0)
            } else {
                let sd = (s / 2.0).sqrt();
                let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                C64::new(a * sd, b * sd)
            };
            h.set(x, y, v);
            h.set(y, x, v.conj());
        }
    }
    Ok(BandMatrixSample { profile: Arc::clone(profile), h, seed, stream })
}

#[derive(Clone, Debug)]
pub struct ResolventFrame {
    sample: Arc<BandMatrixSample>,
    z: C64,
    g: CMatrix,
    residual: f64,
}

impl ResolventFrame {
    pub fn sample(&self) -> &Arc<BandMatrixSample> {
        &self.sample
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn eta(&self) -> f64 {
        self.z.im
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    /// Max entry of `(H - z) G - I`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

pub const RESIDUAL_TOL: f64 = 1e-8;

/// `G(z) = (H - z)^{-1}` by dense LU with partial pivoting.
pub fn resolvent(sample: &Arc<BandMatrixSample>, z: C64) -> Result<ResolventFrame> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Precondition(format!("resolvent needs finite z with Im z > 0, got {z}")));
    }
    let n = sample.h.n();
    check_cap(n, RESOLVENT_CAP)?;
    let mut a = sample.h.to_faer();
    for i in 0..n {
        a[(i, i)] -= z;
    }
    let g = a.partial_piv_lu().inverse();
    let prod = &a * &g;
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((prod[(i, j)] - target).norm());
        }
    }
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::SolveFailure(format!("resolvent residual {residual:e} exceeds {RESIDUAL_TOL:e}")));
    }
    Ok(ResolventFrame { sample: Arc::clone(sample), z, g: CMatrix::from_faer(&g), residual })
}

fn check_point(frame: &ResolventFrame, profile: &VarianceProfile, point: &SpectralPoint) -> Result<()> {
    if (point.z - frame.z).norm() > 1e-12 * (1.0 + frame.z.norm()) {
        return Err(Error::Precondition(format!("spectral point z = {} does not match frame z = {}", point.z, frame.z)));
    }
    if profile.geometry() != frame.sample.geometry() {
        return Err(Error::GeometryMismatch("profile and sample geometries differ".into()));
    }
    Ok(())
}

fn dense_s(profile: &VarianceProfile) -> Mat<f64> {
    let n = profile.geometry().n();
    Mat::from_fn(n, n, |x, y| profile.s(x, y))
}

/// `T_xy = |m|^2 sum_a s_xa |G_ay|^2`.
pub fn t_matrix(frame: &ResolventFrame, profile: &VarianceProfile, point: &SpectralPoint) -> Result<RMatrix> {
    check_point(frame, profile, point)?;
    let n = frame.g.n();
    let abs2 = Mat::from_fn(n, n, |i, j| frame.g.get(i, j).norm_sqr());
    let t = dense_s(profile) * abs2;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push((point.absm2 * t[(i, j)]).max(0.0));
        }
    }
    Ok(RMatrix { n, data })
}

/// `(T_{x,y1y2}, T_{y1y2,x})` with
/// `T_{x,y1y2} = |m|^2 sum_a s_xa G_{a y1} conj(G_{a y2})` and
/// `T_{y1y2,x} = |m|^2 sum_a G_{y1 a} conj(G_{y2 a}) s_ax`.
pub fn t_general(
    frame: &ResolventFrame,
    profile: &VarianceProfile,
    point: &SpectralPoint,
    x: usize,
    y1: usize,
    y2: usize,
) -> Result<(C64, C64)> {
    check_point(frame, profile, point)?;
    let n = frame.g.n();
    for i in [x, y1, y2] {
        if i >= n {
            return Err(Error::InvalidArgument(format!("site index {i} out of range for N = {n}")));
        }
    }
    let g = &frame.g;
    let mut a = C64::new(0.0, 0.0);
    let mut b = C64::new(0.0, 0.0);
    for al in 0..n {
        let s = profile.s(x, al);
        if s != 0.0 {
            a += g.get(al, y1) * g.get(al, y2).conj() * s;
            b += g.get(y1, al) * g.get(y2, al).conj() * s;
        }
    }
    Ok((a * point.absm2, b * point.absm2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardReport {
    /// Max residual of the column identity `sum_x conj(G_xy') G_xy = (G_y'y - conj G_yy') / 2i eta`.
    pub column: f64,
    /// Max residual of the row identity `sum_x conj(G_y'x) G_yx = (G_yy' - conj G_y'y) / 2i eta`.
    pub row: f64,
    /// `max_y Im G_yy / eta`.
    pub scale: f64,
}

impl WardReport {
    pub fn residual(&self) -> f64 {
        self.column.max(self.row)
    }
}

pub fn ward_report(frame: &ResolventFrame) -> WardReport {
    let n = frame.g.n();
    let eta = frame.eta();
    let g = frame.g.to_faer();
    let gh = g.adjoint().to_owned();
    let cols = &gh * &g; // (G* G)_{y'y} = sum_x conj(G_xy') G_xy
    let rows = &g * &gh; // (G G*)_{yy'} = sum_x G_yx conj(G_y'x)
    let two_i_eta = C64::new(0.0, 2.0 * eta);
    let (mut column, mut row): (f64, f64) = (0.0, 0.0);
    for y in 0..n {
        for yp in 0..n {
            let rc = (g[(yp, y)] - g[(y, yp)].conj()) / two_i_eta;
            column = column.max((cols[(yp, y)] - rc).norm());
            let rr = (g[(y, yp)] - g[(yp, y)].conj()) / two_i_eta;
            row = row.max((rows[(y, yp)] - rr).norm());
        }
    }
    let scale = (0..n).map(|y| g[(y, y)].im / eta).fold(0.0, f64::max);
    WardReport { column, row, scale }
}

/// Max residual over both Ward identities and all `(y, y')`.
pub fn ward_check(frame: &ResolventFrame) -> f64 {
    ward_report(frame).residual()
}

fn same_sample(a: &ResolventFrame, b: &ResolventFrame) -> bool {
    Arc::ptr_eq(&a.sample, &b.sample) || a.sample.h == b.sample.h
}

/// Max entry of `G(z) - G(z') - (z - z') G(z) G(z')`.
pub fn interp_residual(a: &ResolventFrame, b: &ResolventFrame) -> Result<f64> {
    if !same_sample(a, b) {
        return Err(Error::Precondition("frames come from different samples".into()));
    }
    let (ga, gb) = (a.g.to_faer(), b.g.to_faer());
    let prod = &ga * &gb;
    let dz = a.z - b.z;
    let n = a.g.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((ga[(i, j)] - gb[(i, j)] - dz * prod[(i, j)]).norm());
        }
    }
    Ok(worst)
}

/// Window radius `floor(W^{1+tau})`.
pub fn psi_radius(w: usize, tau: f64) -> usize {
    (w as f64).powf(1.0 + tau).floor() as usize
}

/// `Psi^2_xy = W^-D + max_{x1 ~ x, y1 ~ y} s_{x1 y1} + W^{-(2+2 tau) d} sum_{x1 ~ x} sum_{y1 ~ y} |G_{x1 y1}|^2`
/// with `~` meaning within `floor(W^{1+tau})` in torus distance.
pub fn psi_matrix(frame: &ResolventFrame, tau: f64, dcap: f64) -> Result<RMatrix> {
    if !(tau > 0.0) || !(dcap > 0.0) {
        return Err(Error::InvalidArgument(format!("need tau > 0 and D > 0, got ({tau}, {dcap})")));
    }
    let profile = frame.sample.profile();
    let geom = profile.geometry();
    let lat = geom.lattice();
    let (n, w, d) = (geom.n(), geom.w() as f64, geom.d() as i32);
    let r = psi_radius(geom.w(), tau);
    // Differences y1 - x1 of points in two radius-r balls fill the radius-2r ball.
    let smax = ball_max(lat, profile.field(), 2 * r);
    let abs2: Vec<f64> = frame.g.as_slice().iter().map(|v| v.norm_sqr()).collect();
    // Window in y along each row, then in x along each column.
    let mut rows: Vec<f64> = abs2.par_chunks(n).flat_map_iter(|row| ball_sum(lat, row, r)).collect();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|y| {
            let col: Vec<f64> = (0..n).map(|x| rows[x * n + y]).collect();
            ball_sum(lat, &col, r)
        })
        .collect();
    for (y, col) in cols.iter().enumerate() {
        for x in 0..n {
            rows[x * n + y] = col[x];
        }
    }
    let floor = w.powf(-dcap);
    let pre = w.powf(-(2.0 + 2.0 * tau) * d as f64);
    let data = (0..n * n)
        .map(|k| {
            let (x, y) = (k / n, k % n);
            floor + smax[lat.sub_index(y, x)] + pre * rows[k]
        })
        .collect();
    Ok(RMatrix { n, data })
}

/// `A_{y'y} = (G_{y'y} - conj G_{yy'}) / (2 i eta |w_y| |w_y'|)` with `|w_y|^2 = Im G_yy / eta`.
pub fn overlap_matrix(frame: &ResolventFrame, index_set: &[usize]) -> Result<CMatrix> {
    if index_set.is_empty() {
        return Err(Error::InvalidArgument("index set must be nonempty".into()));
    }
    let n = frame.g.n();
    let eta = frame.eta();
    let mut norms = Vec::with_capacity(index_set.len());
    for &y in index_set {
        if y >= n {
            return Err(Error::InvalidArgument(format!("site index {y} out of range for N = {n}")));
        }
        let w2 = frame.g.get(y, y).im / eta;
        if !(w2 > 0.0) {
            return Err(Error::SolveFailure(format!("resolvent column {y} has zero norm")));
        }
        norms.push(w2.sqrt());
    }
    let k = index_set.len();
    let mut a = CMatrix::zeros(k);
    let two_i_eta = C64::new(0.0, 2.0 * eta);
    for (i, &yp) in index_set.iter().enumerate() {
        for (j, &y) in index_set.iter().enumerate() {
            let v = (frame.g.get(yp, y) - frame.g.get(y, yp).conj()) / (two_i_eta * norms[i] * norms[j]);
            a.set(i, j, v);
        }
    }
    Ok(a)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    check_cap(m.n(), EIGEN_CAP)?;
    let a = m.to_faer();
    let mut ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::SolveFailure(format!("eigenvalue solver failed: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub lambda: f64,
    pub norm2: f64,
    pub sup: f64,
    pub ipr: f64,
    /// `min_{x0} sum_x |u(x)|^2 exp((|x - x0| / ell)^gamma)`.
    pub weight: f64,
    pub x0: usize,
    /// Whether `weight <= K`, i.e. the vector is localized at length `ell`.
    pub localized: bool,
}

/// Per-vector metrics for the bulk eigenvalues in `(-2 + kappa, 2 - kappa)`.
pub fn eigen_metrics(
    sample: &BandMatrixSample,
    kappa: f64,
    ell: f64,
    gamma: f64,
    kbound: f64,
) -> Result<Vec<EigenReport>> {
    if !(kappa > 0.0 && kappa < 2.0) || !(ell > 0.0) || !(gamma > 0.0 && gamma <= 1.0) || !(kbound > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < kappa < 2, ell > 0, 0 < gamma <= 1, K > 1; got ({kappa}, {ell}, {gamma}, {kbound})"
        )));
    }
    let n = sample.h.n();
    check_cap(n, EIGEN_CAP)?;
    let evd = sample
        .h
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SolveFailure(format!("eigensolver failed: {e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    let lat = *sample.geometry().lattice();
    let weights: Vec<f64> = (0..n).map(|i| ((lat.norm_index(i) as f64 / ell).powf(gamma)).exp()).collect();
    let bulk: Vec<usize> = (0..n).filter(|&k| s[k].re.abs() < 2.0 - kappa).collect();
    let reports = bulk
        .par_iter()
        .map(|&k| {
            let p: Vec<f64> = (0..n).map(|x| u[(x, k)].norm_sqr()).collect();
            let support: Vec<usize> = (0..n).filter(|&x| p[x] > 0.0).collect();
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for x0 in 0..n {
                let mut acc = 0.0;
                for &x in &support {
                    acc += p[x] * weights[lat.sub_index(x, x0)];
                    if acc >= best {
                        break;
                    }
                }
                if acc < best {
                    best = acc;
                    arg = x0;
                }
            }
            EigenReport {
                lambda: s[k].re,
                norm2: p.iter().sum(),
                sup: p.iter().cloned().fold(0.0, f64::max).sqrt(),
                ipr: p.iter().map(|v| v * v).sum(),
                weight: best,
                x0: arg,
                localized: best <= kbound,
            }
        })
        .collect();
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ProfileSpec};
    use crate::spectral::m_sc;

    fn profile(d: usize, l: usize, w: usize) -> Arc<VarianceProfile> {
        let g = BandGeometry::new(d, l, w).unwrap();
        Arc::new(build_profile(&ProfileSpec::gaussian(), &g).unwrap())
    }

    #[test]
    fn sample_is_hermitian_and_reproducible() {
        let p = profile(2, 6, 2);
        let a = sample_h(&p, 11).unwrap();
        let b = sample_h(&p, 11).unwrap();
        assert_eq!(a.h(), b.h());
        assert_eq!(a.h(), &a.h().adjoint());
        assert_ne!(sample_stream(&p, 11, 1).unwrap().h(), a.h());
        let n = p.geometry().n();
        assert!((0..n).all(|i| a.h().get(i, i).im == 0.0));
    }

    #[test]
    fn entry_moments() {
        let p = profile(1, 8, 2);
        let pairs = [(0usize, 1usize), (2, 2), (0, 4)];
        let k = 2000;
        let mut sums = vec![(C64::new(0.0, 0.0), 0.0, 0.0); pairs.len()];
        for seed in 0..k {
            let s = sample_h(&p, seed).unwrap();
            for (acc, &(x, y)) in sums.iter_mut().zip(&pairs) {
                let h = s.h().get(x, y);
                acc.0 += h;
                acc.1 += h.norm_sqr();
                acc.2 += h.norm_sqr().powi(2);
            }
        }
        for ((mean, m2, m4), &(x, y)) in sums.iter().zip(&pairs) {
            let kf = k as f64;
            let sxy = p.s(x, y);
            let se_mean = (sxy / kf).sqrt();
            assert!((mean / kf).norm() <= 5.0 * se_mean * 2f64.sqrt(), "{x},{y}");
            let var2 = m4 / kf - (m2 / kf).powi(2);
            assert!((m2 / kf - sxy).abs() <= 5.0 * (var2 / kf).sqrt(), "{x},{y}: {} vs {sxy}", m2 / kf);
        }
    }

    #[test]
    fn zero_matrix_resolvent() {
        let p = profile(1, 6, 2);
        let s = Arc::new(BandMatrixSample::from_matrix(Arc::clone(&p), CMatrix::zeros(6), 0).unwrap());
        let z = C64::new(0.3, 0.7);
        let f = resolvent(&s, z).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { -z.inv() } else { C64::new(0.0, 0.0) };
                assert!((f.g().get(i, j) - want).norm() < 1e-14);
            }
        }
        assert!(resolvent(&s, C64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn resolvent_identities() {
        let p = profile(2, 8, 2);
        let s = Arc::new(sample_h(&p, 5).unwrap());
        let z = C64::new(0.4, 0.1);
        let f = resolvent(&s, z).unwrap();
        assert!(f.residual() <= 1e-8);
        // G(conj z) = G(z)^*: the adjoint inverts H - conj z.
        let gadj = f.g().adjoint();
        let mut a = s.h().to_faer();
        for i in 0..s.h().n() {
            a[(i, i)] -= z.conj();
        }
        let prod = &a * &gadj.to_faer();
        for i in 0..s.h().n() {
            for j in 0..s.h().n() {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - t).norm() < 1e-10);
            }
        }
        let w = ward_report(&f);
        assert!(w.residual() <= 1e-10 * w.scale, "{w:?}");
        let n = s.h().n();
        for y in [0usize, 7, 33] {
            let col: f64 = (0..n).map(|x| f.g().get(x, y).norm_sqr()).sum();
            let row: f64 = (0..n).map(|x| f.g().get(y, x).norm_sqr()).sum();
            let im = f.g().get(y, y).im / z.im;
            assert!((col - im).abs() <= 1e-10 * im && (row - im).abs() <= 1e-10 * im);
        }
    }

    #[test]
    fn resolvent_interpolation() {
        let p = profile(1, 32, 3);
        let s = Arc::new(sample_h(&p, 9).unwrap());
        let a = resolvent(&s, C64::new(0.2, 1.0)).unwrap();
        let b = resolvent(&s, C64::new(0.2, 0.5)).unwrap();
        assert_eq!(interp_residual(&a, &a).unwrap(), 0.0);
        assert!(interp_residual(&a, &b).unwrap() <= 1e-8 * a.g().max_abs().max(b.g().max_abs()));
        // eta Im G_yy = sum eta^2 / ((lambda - E)^2 + eta^2) |u(y)|^2 grows with eta.
        for y in 0..32 {
            assert!(b.eta() * b.g().get(y, y).im <= a.eta() * a.g().get(y, y).im + 1e-14);
        }
        let other = Arc::new(sample_h(&p, 10).unwrap());
        let c = resolvent(&other, C64::new(0.2, 0.5)).unwrap();
        assert!(interp_residual(&a, &c).is_err());
    }

    #[test]
    fn t_variables() {
        let p = profile(1, 24, 3);
        let s = Arc::new(sample_h(&p, 3).unwrap());
        let z = C64::new(-0.3, 0.2);
        let pt = m_sc(z).unwrap();
        let f = resolvent(&s, z).unwrap();
        let t = t_matrix(&f, &p, &pt).unwrap();
        assert!(t.as_slice().iter().all(|&v| v >= 0.0));
        for x in 0..24 {
            let rs: f64 = t.row(x).iter().sum();
            let ward: f64 = (0..24).map(|a| p.s(x, a) * f.g().get(a, a).im / z.im).sum::<f64>() * pt.absm2;
            assert!((rs - ward).abs() <= 1e-8 * ward);
        }
        for (x, y1, y2) in [(0usize, 0usize, 0usize), (3, 5, 5), (1, 4, 9), (7, 2, 20)] {
            let (a, b) = t_general(&f, &p, &pt, x, y1, y2).unwrap();
            let (ac, bc) = t_general(&f, &p, &pt, x, y2, y1).unwrap();
            assert!((ac - a.conj()).norm() < 1e-15 && (bc - b.conj()).norm() < 1e-15);
            if y1 == y2 {
                assert!((a.re - t.get(x, y1)).abs() <= 1e-12 * t.get(x, y1).max(1e-300) && a.im.abs() < 1e-15);
            }
            // Transposed orientation is the first formula applied to G^T.
            let gt: Vec<C64> = (0..24 * 24).map(|k| f.g().get(k % 24, k / 24)).collect();
            let direct: C64 = (0..24)
                .map(|al| gt[al * 24 + y1] * gt[al * 24 + y2].conj() * p.s(al, x))
                .sum::<C64>()
                * pt.absm2;
            assert!((direct - b).norm() < 1e-14);
        }
        let wrong = m_sc(C64::new(0.0, 0.2)).unwrap();
        assert!(t_matrix(&f, &p, &wrong).is_err());
    }

    #[test]
    fn psi_examples() {
        let p = profile(1, 32, 3);
        let (tau, dcap) = (0.2, 10.0);
        let z = C64::new(0.1, 0.5);
        let s0 = Arc::new(BandMatrixSample::from_matrix(Arc::clone(&p), CMatrix::zeros(32), 0).unwrap());
        let f0 = resolvent(&s0, z).unwrap();
        let psi = psi_matrix(&f0, tau, dcap).unwrap();
        let r = psi_radius(3, tau);
        assert_eq!(r, 3);
        let lat = p.geometry().lattice();
        for x in 0..32usize {
            for y in 0..32usize {
                let (mut smax, mut mass) = (0.0f64, 0.0);
                for x1 in 0..32usize {
                    for y1 in 0..32usize {
                        let near = lat.norm_index(lat.sub_index(x1, x)) as usize <= r
                            && lat.norm_index(lat.sub_index(y1, y)) as usize <= r;
                        if near {
                            smax = smax.max(p.s(x1, y1));
                            if x1 == y1 {
                                mass += z.inv().norm_sqr();
                            }
                        }
                    }
                }
                let want = 3f64.powf(-dcap) + smax + 3f64.powf(-2.4) * mass;
                assert!((psi.get(x, y) - want).abs() <= 1e-14 * want);
            }
        }

        let s = Arc::new(sample_h(&p, 21).unwrap());
        let f = resolvent(&s, z).unwrap();
        let psi = psi_matrix(&f, tau, dcap).unwrap();
        assert!(psi.as_slice().iter().all(|&v| v >= 3f64.powf(-dcap)));
        let near = 3f64.powf(1.1).floor() as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use rand::Rng;
        for _ in 0..100 {
            let (x1, x2) = (rng.gen_range(0..32i64), rng.gen_range(0..32i64));
            let y1 = x1 + rng.gen_range(-near..=near);
            let y2 = x2 + rng.gen_range(-near..=near);
            let (iy1, iy2) = (lat.index_of(&[y1]).unwrap(), lat.index_of(&[y2]).unwrap());
            let g2 = f.g().get(iy1, iy2).norm_sqr();
            let bound = 3f64.powf(0.4) * psi.get(x1 as usize, x2 as usize);
            if iy1 != iy2 {
                assert!(g2 <= bound, "{x1} {x2} {y1} {y2}: {g2} > {bound}");
            }
        }
    }

    #[test]
    fn overlap_properties() {
        let p = profile(2, 8, 2);
        let s = Arc::new(sample_h(&p, 4).unwrap());
        let f = resolvent(&s, C64::new(0.0, 0.05)).unwrap();
        let idx = [0usize, 3, 9, 27, 40, 63];
        let a = overlap_matrix(&f, &idx).unwrap();
        for i in 0..idx.len() {
            assert!((a.get(i, i) - 1.0).norm() < 1e-10);
            for j in 0..idx.len() {
                assert!((a.get(i, j) - a.get(j, i).conj()).norm() < 1e-12);
            }
        }
        let mut herm = a.clone();
        for i in 0..idx.len() {
            for j in 0..idx.len() {
                herm.set(i, j, (a.get(i, j) + a.get(j, i).conj()) * 0.5);
            }
        }
        let ev = hermitian_eigenvalues(&herm).unwrap();
        assert!(ev[0] >= -1e-10);
        assert!(*ev.last().unwrap() <= idx.len() as f64 + 1e-8);
        assert!(overlap_matrix(&f, &[]).is_err());
    }

    #[test]
    fn eigen_normalization() {
        let p = profile(1, 64, 4);
        let s = sample_h(&p, 8).unwrap();
        let r = eigen_metrics(&s, 0.2, 4.0, 1.0, 10.0).unwrap();
        assert!(!r.is_empty());
        for v in &r {
            assert!((v.norm2 - 1.0).abs() < 1e-10);
            assert!(v.sup >= 1.0 / 8.0 - 1e-12);
            assert!(v.lambda.abs() < 1.8);
            assert!(v.weight >= 1.0);
        }
    }

    #[test]
    fn mean_field_vectors_are_delocalized() {
        let g = BandGeometry::new(1, 256, 256).unwrap();
        let p = Arc::new(VarianceProfile::uniform(&g));
        let n = 256f64;
        let mut medians = Vec::new();
        for seed in 0..20 {
            let s = sample_h(&p, seed).unwrap();
            let mut sup2: Vec<f64> = eigen_metrics(&s, 0.1, 8.0, 1.0, 10.0).unwrap().iter().map(|v| v.sup * v.sup).collect();
            sup2.sort_by(f64::total_cmp);
            medians.push(sup2[sup2.len() / 2]);
        }
        medians.sort_by(f64::total_cmp);
        let med = medians[medians.len() / 2];
        assert!(med <= 20.0 * n.ln() / n, "{med}");
    }

    #[test]
    fn size_caps() {
        let g = BandGeometry::new(2, 78, 2).unwrap();
        let p = Arc::new(VarianceProfile::uniform(&g));
        assert!(matches!(sample_h(&p, 0), Err(Error::SizeCap { n: 6084, cap: 6000 })));
    }
}
