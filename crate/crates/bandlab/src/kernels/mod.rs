//! Translation invariant deterministic kernels on the torus.
//!
//! Every kernel is a displacement field `K(x)` with `K_{xy} = K(y - x)`, built
//! from its momentum symbol and transformed back.

mod infinite;
mod norms;
mod sumzero;

pub use infinite::{kernel_infinite_limit, InfiniteKind, QuadratureOptions};
pub use norms::{kernel_norms, KernelNorms};
pub use sumzero::{sum_zero_smoothing, SumZeroReport};

use crate::dft;
use crate::error::{Error, Result};
use crate::profile::VarianceProfile;
use crate::spectral::{r_of_e, SpectralPoint};
use crate::torus::BandGeometry;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    S,
    Splus,
    Sminus,
    Theta,
    ThetaWalk,
    ThetaM,
    B,
    SelfEnergy,
    LabelledTheta,
    Custom,
}

/// Smallest admissible modulus of a symbol denominator.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LatticeKernel {
    geom: BandGeometry,
    kind: KernelKind,
    values: Vec<C64>,
    symbol: Vec<C64>,
    point: Option<SpectralPoint>,
    order: Option<i64>,
}

fn symmetrize(geom: &BandGeometry, v: &[C64]) -> Vec<C64> {
    let lat = geom.lattice();
    (0..v.len()).map(|i| (v[i] + v[lat.neg_index(i)]) * 0.5).collect()
}

impl LatticeKernel {
    /// Kernel with the given symbol; values come from the inverse transform,
    /// symmetrized so that `K(x) = K(-x)` holds exactly.
    pub fn from_symbol(
        geom: &BandGeometry,
        kind: KernelKind,
        symbol: Vec<C64>,
        point: Option<SpectralPoint>,
    ) -> Result<Self> {
        check_len(geom, symbol.len())?;
        let values = symmetrize(geom, &dft::inverse(geom.lattice(), &symbol));
        Ok(Self { geom: *geom, kind, values, symbol, point, order: None })
    }

    /// Kernel with the given displacement values (symmetrized), symbol by forward transform.
    pub fn from_values(
        geom: &BandGeometry,
        kind: KernelKind,
        values: Vec<C64>,
        point: Option<SpectralPoint>,
    ) -> Result<Self> {
        check_len(geom, values.len())?;
        let values = symmetrize(geom, &values);
        let symbol = dft::forward(geom.lattice(), &values);
        Ok(Self { geom: *geom, kind, values, symbol, point, order: None })
    }

    pub fn with_order(mut self, order: i64) -> Self {
        self.order = Some(order);
        self
    }

    pub fn with_kind(mut self, kind: KernelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn geometry(&self) -> &BandGeometry {
        &self.geom
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn symbol(&self) -> &[C64] {
        &self.symbol
    }

    pub fn point(&self) -> Option<&SpectralPoint> {
        self.point.as_ref()
    }

    /// Scaling order carried by labelled diffusive edges.
    pub fn order(&self) -> Option<i64> {
        self.order
    }

    /// Matrix entry `K_{xy} = K(y - x)` for site indices.
    pub fn at(&self, x: usize, y: usize) -> C64 {
        self.values[self.geom.lattice().sub_index(y, x)]
    }

    pub fn row_sum(&self) -> C64 {
        self.values.iter().sum()
    }

    pub fn conj(&self) -> Self {
        Self {
            geom: self.geom,
            kind: self.kind,
            values: self.values.iter().map(|v| v.conj()).collect(),
            symbol: self.symbol.iter().map(|v| v.conj()).collect(),
            point: self.point,
            order: self.order,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.symbol.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Relative Plancherel defect `|sum |K|^2 - N^{-1} sum |K^|^2| / sum |K|^2`.
    pub fn plancherel_defect(&self) -> f64 {
        let a: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        let b: f64 = self.symbol.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64;
        if a == 0.0 {
            b
        } else {
            (a - b).abs() / a
        }
    }

    /// Largest deviation between the stored values and the inverse transform of the symbol.
    pub fn round_trip_defect(&self) -> f64 {
        let back = dft::inverse(self.geom.lattice(), &self.symbol);
        back.iter().zip(&self.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Rows `(x_1, ..., x_d, re, im)`.
    pub fn value_rows(&self) -> Vec<Vec<f64>> {
        let lat = self.geom.lattice();
        (0..lat.n())
            .map(|i| {
                let mut r: Vec<f64> = lat.site(i).into_iter().map(|c| c as f64).collect();
                r.extend([self.values[i].re, self.values[i].im]);
                r
            })
            .collect()
    }

    /// Rows `(p_1, ..., p_d, re, im)` over the momentum lattice.
    pub fn symbol_rows(&self) -> Vec<Vec<f64>> {
        let lat = self.geom.lattice();
        (0..lat.n())
            .map(|i| {
                let mut r = lat.momentum(i);
                r.extend([self.symbol[i].re, self.symbol[i].im]);
                r
            })
            .collect()
    }
}

fn check_len(geom: &BandGeometry, len: usize) -> Result<()> {
    if len != geom.n() {
        return Err(Error::DimensionMismatch { expected: geom.n(), got: len });
    }
    Ok(())
}

fn check_denominators<'a>(dens: impl Iterator<Item = &'a C64>) -> Result<()> {
    let min = dens.map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    if !(min >= SINGULAR_TOL) {
        return Err(Error::NearSingularSymbol { min_modulus: min });
    }
    Ok(())
}

/// A self-energy: symmetric translation invariant kernel with a declared scaling order.
#[derive(Clone, Debug)]
pub struct SelfEnergyKernel {
    pub kernel: LatticeKernel,
    pub order: i64,
    pub label: String,
}

impl SelfEnergyKernel {
    pub fn new(kernel: LatticeKernel, order: i64, label: impl Into<String>) -> Result<Self> {
        if order < 4 || order % 2 != 0 {
            return Err(Error::InvalidArgument(format!("self-energy order {order} must be even and >= 4")));
        }
        Ok(Self { kernel: kernel.with_kind(KernelKind::SelfEnergy), order, label: label.into() })
    }

    /// Zero self-energy of the given order.
    pub fn zero(geom: &BandGeometry, order: i64) -> Result<Self> {
        let k = LatticeKernel::from_values(geom, KernelKind::SelfEnergy, vec![C64::new(0.0, 0.0); geom.n()], None)?;
        Self::new(k, order, "zero")
    }
}

/// The variance kernel `S` itself.
pub fn s_kernel(profile: &VarianceProfile) -> Result<LatticeKernel> {
    let v = profile.field().iter().map(|&f| C64::new(f, 0.0)).collect();
    LatticeKernel::from_values(profile.geometry(), KernelKind::S, v, None)
}

/// `S+ = m^2 S / (1 - m^2 S)`.
pub fn splus_kernel(profile: &VarianceProfile, point: &SpectralPoint) -> Result<LatticeKernel> {
    let m2 = point.m * point.m;
    let dens: Vec<C64> = profile.symbol().iter().map(|&s| 1.0 - m2 * s).collect();
    check_denominators(dens.iter())?;
    let symbol = profile.symbol().iter().zip(&dens).map(|(&s, d)| m2 * s / d).collect();
    LatticeKernel::from_symbol(profile.geometry(), KernelKind::Splus, symbol, Some(*point))
}

/// `S- = conj(S+)` entrywise.
pub fn sminus_kernel(profile: &VarianceProfile, point: &SpectralPoint) -> Result<LatticeKernel> {
    Ok(splus_kernel(profile, point)?.conj().with_kind(KernelKind::Sminus))
}

/// Floors roundoff negatives of a nonnegative real field; larger negatives are an error.
fn floor_nonnegative(values: &mut [C64]) -> Result<()> {
    let max = values.iter().map(|v| v.re).fold(0.0, f64::max);
    for v in values.iter_mut() {
        if v.re < 0.0 {
            if -v.re < 1e-12 * max {
                v.re = 0.0;
            } else {
                return Err(Error::NearSingularSymbol { min_modulus: v.re / max });
            }
        }
        v.im = 0.0;
    }
    Ok(())
}

fn need_positive_eta(point: &SpectralPoint) -> Result<()> {
    if !(point.eta() > 0.0) {
        return Err(Error::Precondition(format!("diffusive kernels need eta > 0, got z = {}", point.z)));
    }
    Ok(())
}

/// `Theta = |m|^2 S / (1 - |m|^2 S)`, real and nonnegative.
pub fn theta_kernel(profile: &VarianceProfile, point: &SpectralPoint) -> Result<LatticeKernel> {
    need_positive_eta(point)?;
    let a = point.absm2;
    let dens: Vec<C64> = profile.symbol().iter().map(|&s| C64::new(1.0 - a * s, 0.0)).collect();
    check_denominators(dens.iter())?;
    let symbol: Vec<C64> =
        profile.symbol().iter().zip(&dens).map(|(&s, d)| C64::new(a * s / d.re, 0.0)).collect();
    let mut k = LatticeKernel::from_symbol(profile.geometry(), KernelKind::Theta, symbol, Some(*point))?;
    floor_nonnegative(&mut k.values)?;
    Ok(k.with_order(2))
}

/// `B_{xy} = W^{-2} <x - y>^{-(d-2)}`.
pub fn b_field(geom: &BandGeometry) -> LatticeKernel {
    let w = geom.w() as f64;
    let e = -(geom.d() as i32 - 2);
    let values: Vec<C64> = (0..geom.n())
        .map(|i| C64::new((geom.bracket_index(i) as f64).powi(e) / (w * w), 0.0))
        .collect();
    LatticeKernel::from_values(geom, KernelKind::B, values, None).expect("length matches geometry")
}

/// Truncated walk series `sum_{k=1}^{K} |m|^{2k} S^k`.
pub fn theta_via_walk(profile: &VarianceProfile, point: &SpectralPoint, steps: usize) -> Result<LatticeKernel> {
    if steps == 0 {
        return Err(Error::InvalidArgument("walk length K must be at least 1".into()));
    }
    let a = point.absm2;
    let symbol = profile
        .symbol()
        .iter()
        .map(|&s| {
            let q = a * s;
            let (mut term, mut acc) = (1.0, 0.0);
            for _ in 0..steps {
                term *= q;
                acc += term;
            }
            C64::new(acc, 0.0)
        })
        .collect();
    let mut k = LatticeKernel::from_symbol(profile.geometry(), KernelKind::ThetaWalk, symbol, Some(*point))?;
    floor_nonnegative(&mut k.values)?;
    Ok(k)
}

/// `Theta^(M) = |m|^2 S / (1 - |m|^2 S (1 + Sigma))`.
pub fn theta_renormalized(
    profile: &VarianceProfile,
    point: &SpectralPoint,
    sigma: &SelfEnergyKernel,
) -> Result<LatticeKernel> {
    need_positive_eta(point)?;
    if sigma.kernel.geometry() != profile.geometry() {
        return Err(Error::GeometryMismatch("self-energy and profile live on different tori".into()));
    }
    let a = point.absm2;
    let q: Vec<C64> =
        profile.symbol().iter().zip(sigma.kernel.symbol()).map(|(&s, &e)| a * s * (1.0 + e)).collect();
    let sup = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(sup < 1.0) {
        return Err(Error::ContractionFailure { sup });
    }
    let dens: Vec<C64> = q.iter().map(|v| 1.0 - v).collect();
    check_denominators(dens.iter())?;
    let symbol = profile.symbol().iter().zip(&dens).map(|(&s, d)| a * s / d).collect();
    Ok(LatticeKernel::from_symbol(profile.geometry(), KernelKind::ThetaM, symbol, Some(*point))?.with_order(2))
}

/// `Theta E_1 Theta ... E_l Theta` as one kernel, with order `sum 2k_i - 2(l - 1)`.
pub fn labelled_edge(theta: &LatticeKernel, energies: &[SelfEnergyKernel]) -> Result<LatticeKernel> {
    let mut symbol = theta.symbol().to_vec();
    for e in energies {
        if e.kernel.geometry() != theta.geometry() {
            return Err(Error::GeometryMismatch("self-energy and Theta live on different tori".into()));
        }
        for ((s, &ei), &t) in symbol.iter_mut().zip(e.kernel.symbol()).zip(theta.symbol()) {
            *s *= ei * t;
        }
    }
    let l = energies.len() as i64;
    let order = energies.iter().map(|e| e.order).sum::<i64>() - 2 * (l - 1);
    let kind = if energies.is_empty() { theta.kind() } else { KernelKind::LabelledTheta };
    Ok(LatticeKernel::from_symbol(theta.geometry(), kind, symbol, theta.point().copied())?.with_order(order))
}

/// `D_ij = (r(E)/2) sum_x (x_i x_j / W^2) s_{0x}`.
pub fn diffusion_matrix(profile: &VarianceProfile, e: f64) -> Result<Vec<Vec<f64>>> {
    let r = r_of_e(e)?;
    let w2 = (profile.geometry().w() as f64).powi(2);
    Ok(profile
        .second_moments()
        .into_iter()
        .map(|row| row.into_iter().map(|c| 0.5 * r * c / w2).collect())
        .collect())
}
