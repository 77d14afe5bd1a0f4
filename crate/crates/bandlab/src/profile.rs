//! Banded variance profile `f_{W,L}` built from a shape function `psi`.

use crate::dft;
use crate::error::{Error, Result};
use crate::torus::BandGeometry;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileFamily {
    /// `psi(q) = exp(-width^2 |q|^2 / 2)`.
    Gaussian { width: f64 },
    /// `psi(q) = exp(1 - 1/(1 - |q|^2/cutoff^2))` inside the cutoff, zero outside.
    Bump { cutoff: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct ProfileSpec {
    pub family: ProfileFamily,
    /// Constant in `psi(q) <= max(1 - c |q|^2, 1 - c)`.
    pub c_psi: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FamilyTag {
    Gaussian,
    Bump,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cutoff: Option<f64>,
    #[serde(default = "default_c_psi")]
    c_psi: f64,
}

fn default_c_psi() -> f64 {
    0.3
}

impl TryFrom<SpecRepr> for ProfileSpec {
    type Error = String;

    fn try_from(r: SpecRepr) -> std::result::Result<Self, String> {
        let family = match (r.family, r.width, r.cutoff) {
            (FamilyTag::Gaussian, w, None) => ProfileFamily::Gaussian { width: w.unwrap_or(1.0) },
            (FamilyTag::Bump, None, Some(cutoff)) => ProfileFamily::Bump { cutoff },
            (FamilyTag::Gaussian, _, Some(_)) => return Err("gaussian family takes `width`, not `cutoff`".into()),
            (FamilyTag::Bump, Some(_), _) => return Err("bump family takes `cutoff`, not `width`".into()),
            (FamilyTag::Bump, None, None) => return Err("bump family requires `cutoff`".into()),
        };
        Ok(ProfileSpec { family, c_psi: r.c_psi })
    }
}

impl From<ProfileSpec> for SpecRepr {
    fn from(s: ProfileSpec) -> Self {
        match s.family {
            ProfileFamily::Gaussian { width } => {
                SpecRepr { family: FamilyTag::Gaussian, width: Some(width), cutoff: None, c_psi: s.c_psi }
            }
            ProfileFamily::Bump { cutoff } => {
                SpecRepr { family: FamilyTag::Bump, width: None, cutoff: Some(cutoff), c_psi: s.c_psi }
            }
        }
    }
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

impl ProfileSpec {
    pub fn gaussian() -> Self {
        Self { family: ProfileFamily::Gaussian { width: 1.0 }, c_psi: 0.3 }
    }

    pub fn bump(cutoff: f64, c_psi: f64) -> Self {
        Self { family: ProfileFamily::Bump { cutoff }, c_psi }
    }

    pub fn psi_radial(&self, q2: f64) -> f64 {
        match self.family {
            ProfileFamily::Gaussian { width } => (-0.5 * width * width * q2).exp(),
            ProfileFamily::Bump { cutoff } => {
                let u = q2 / (cutoff * cutoff);
                if u < 1.0 {
                    (-u / (1.0 - u)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `1 - psi` without cancellation near `q = 0`.
    pub fn one_minus_psi_radial(&self, q2: f64) -> f64 {
        match self.family {
            ProfileFamily::Gaussian { width } => -(-0.5 * width * width * q2).exp_m1(),
            ProfileFamily::Bump { cutoff } => {
                let u = q2 / (cutoff * cutoff);
                if u < 1.0 {
                    -(-u / (1.0 - u)).exp_m1()
                } else {
                    1.0
                }
            }
        }
    }

    pub fn psi_eval(&self, q: &[f64]) -> f64 {
        self.psi_radial(q.iter().map(|c| c * c).sum())
    }

    /// Checks the parameters and the bound `psi(q) <= max(1 - c|q|^2, 1 - c)` on a radial grid.
    pub fn validate(&self) -> Result<()> {
        match self.family {
            ProfileFamily::Gaussian { width } if !(width.is_finite() && width > 0.0) => {
                return Err(Error::InvalidProfile(format!("gaussian width {width} must be positive")));
            }
            ProfileFamily::Bump { cutoff } if !(cutoff.is_finite() && cutoff > 0.0) => {
                return Err(Error::InvalidProfile(format!("bump cutoff {cutoff} must be positive")));
            }
            _ => {}
        }
        let c = self.c_psi;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidProfile(format!("c_psi = {c} must lie in (0, 1)")));
        }
        for i in 0..=4000 {
            let q = i as f64 * 2.5e-3;
            let bound = (1.0 - c * q * q).max(1.0 - c);
            let v = self.psi_radial(q * q);
            if v > bound + 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "psi({q:.4}) = {v:.6} exceeds max(1 - c q^2, 1 - c) = {bound:.6} for c = {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Translation invariant, symmetric, doubly stochastic variance field.
#[derive(Clone, Debug)]
pub struct VarianceProfile {
    geom: BandGeometry,
    spec: ProfileSpec,
    f: Vec<f64>,
    symbol: Vec<f64>,
}

const ROUNDOFF_FLOOR: f64 = 1e-14;

pub fn build_profile(spec: &ProfileSpec, geom: &BandGeometry) -> Result<VarianceProfile> {
    spec.validate()?;
    let lat = geom.lattice();
    let w = geom.w() as f64;
    let raw: Vec<_> = (0..lat.n())
        .map(|k| {
            let q2: f64 = lat.momentum(k).iter().map(|p| (w * p) * (w * p)).sum();
            num_complex::Complex64::new(spec.psi_radial(q2), 0.0)
        })
        .collect();
    let vals = dft::inverse(lat, &raw);
    let mut f: Vec<f64> =
        (0..lat.n()).map(|i| 0.5 * (vals[i].re + vals[lat.neg_index(i)].re)).collect();
    let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (i, v) in f.iter_mut().enumerate() {
        if *v <= 0.0 {
            if -*v < ROUNDOFF_FLOOR * max {
                *v = f64::MIN_POSITIVE;
            } else {
                return Err(Error::PositivityViolation { site: lat.site(i), value: *v, max });
            }
        }
    }
    let total: f64 = f.iter().sum();
    f.iter_mut().for_each(|v| *v /= total);
    let symbol = dft::forward_real(lat, &f).into_iter().map(|c| c.re).collect();
    Ok(VarianceProfile { geom: *geom, spec: spec.clone(), f, symbol })
}

impl VarianceProfile {
    /// Uniform profile `f = 1/N`, the `W = L` mean-field limit.
    pub fn uniform(geom: &BandGeometry) -> Self {
        let n = geom.n();
        let mut symbol = vec![0.0; n];
        symbol[0] = 1.0;
        Self { geom: *geom, spec: ProfileSpec::gaussian(), f: vec![1.0 / n as f64; n], symbol }
    }

    pub fn geometry(&self) -> &BandGeometry {
        &self.geom
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// Displacement field `f(x)` in lattice index order.
    pub fn field(&self) -> &[f64] {
        &self.f
    }

    /// `S^(p) = sum_x f(x) e^{i p.x}` in momentum index order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Matrix entry `s_{xy}` for site indices.
    pub fn s(&self, x: usize, y: usize) -> f64 {
        self.f[self.geom.lattice().sub_index(y, x)]
    }

    /// Empirical `C_k = max_{x != 0} |f(x)| W^d (||x||/W)^k`.
    pub fn decay_report(&self, k: u32) -> f64 {
        let lat = self.geom.lattice();
        let w = self.geom.w() as f64;
        let wd = w.powi(self.geom.d() as i32);
        (1..lat.n())
            .map(|i| self.f[i].abs() * wd * (lat.norm_index(i) as f64 / w).powi(k as i32))
            .fold(0.0, f64::max)
    }

    /// Mass of `f` at distance strictly greater than `radius`.
    pub fn tail_mass(&self, radius: f64) -> f64 {
        let lat = self.geom.lattice();
        (0..lat.n()).filter(|&i| lat.norm_index(i) as f64 > radius).map(|i| self.f[i]).sum()
    }

    /// Second-moment matrix `C_ij = sum_x x_i x_j f(x)` over torus representatives,
/// using [`TorusLattice::moment_product`] for antipodal coordinates.
    pub fn second_moments(&self) -> Vec<Vec<f64>> {
        let lat = self.geom.lattice();
        let d = lat.d();
        let mut c = vec![vec![0.0; d]; d];
        let mut x = vec![0i64; d];
        for (idx, &v) in self.f.iter().enumerate() {
            lat.site_into(idx, &mut x);
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += lat.moment_product(&x, i, j) * v;
                }
            }
        }
        c
    }

    /// Rows `(x_1, ..., x_d, f)` for CSV inspection.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let lat = self.geom.lattice();
        (0..lat.n())
            .map(|i| {
                let mut r: Vec<f64> = lat.site(i).into_iter().map(|c| c as f64).collect();
                r.push(self.f[i]);
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the L-term series, independent of the transform.
    fn series_oracle(w: f64, l: usize, x: i64) -> f64 {
        let mut s = 0.0;
        for k in 0..l as i64 {
            let n = if 2 * k > l as i64 { k - l as i64 } else { k };
            let p = 2.0 * std::f64::consts::PI * n as f64 / l as f64;
            s += (-0.5 * (w * p).powi(2)).exp() * (p * x as f64).cos();
        }
        s / l as f64
    }

    #[test]
    fn gaussian_profile_is_positive_and_peaked() {
        let g = BandGeometry::new(1, 32, 4).unwrap();
        let p = build_profile(&ProfileSpec::gaussian(), &g).unwrap();
        let f = p.field();
        assert!(f.iter().all(|&v| v > 0.0));
        let argmax = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        assert_eq!(argmax, 0);
        let z: f64 = (0..32).map(|x| series_oracle(4.0, 32, x)).sum();
        for x in 0..32i64 {
            let idx = g.lattice().index_of(&[x]).unwrap();
            assert!((f[idx] - series_oracle(4.0, 32, x) / z).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_symmetric_and_stochastic() {
        let g = BandGeometry::new(2, 12, 3).unwrap();
        let p = build_profile(&ProfileSpec::gaussian(), &g).unwrap();
        let lat = g.lattice();
        assert!((p.field().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.symbol()[0] - 1.0).abs() < 1e-12);
        for i in 0..lat.n() {
            assert_eq!(p.field()[i], p.field()[lat.neg_index(i)]);
        }
        for x in 0..lat.n() {
            let row: f64 = (0..lat.n()).map(|y| p.s(x, y)).sum();
            let col: f64 = (0..lat.n()).map(|y| p.s(y, x)).sum();
            assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s: ProfileSpec = serde_json::from_str(r#"{"family":"bump","cutoff":2.0,"c_psi":0.2}"#).unwrap();
        assert_eq!(s, ProfileSpec::bump(2.0, 0.2));
        let back: ProfileSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ProfileSpec>(r#"{"family":"gaussian","sigma":1}"#).is_err());
        assert!(serde_json::from_str::<ProfileSpec>(r#"{"family":"bump"}"#).is_err());
    }

    #[test]
    fn psi_examples() {
        let g = ProfileSpec::gaussian();
        assert_eq!(g.psi_eval(&[0.0, 0.0]), 1.0);
        for q in [0.1, 1.0, 3.0] {
            assert!(g.psi_eval(&[q]) <= 1.0);
        }
        let b = ProfileSpec::bump(2.0, 0.2);
        assert_eq!(b.psi_eval(&[0.0]), 1.0);
        assert_eq!(b.psi_eval(&[2.5]), 0.0);
        assert_eq!(b.psi_eval(&[1.5, 1.5]), 0.0);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let narrow = ProfileSpec { family: ProfileFamily::Gaussian { width: 0.5 }, c_psi: 0.3 };
        assert!(matches!(narrow.validate(), Err(Error::InvalidProfile(_))));
        let wide_bump = ProfileSpec::bump(10.0, 0.3);
        assert!(wide_bump.validate().is_err());
    }

    #[test]
    fn aggressive_bump_is_not_positive() {
        let g = BandGeometry::new(1, 64, 4).unwrap();
        let r = build_profile(&ProfileSpec::bump(3.0, 0.1), &g);
        assert!(matches!(r, Err(Error::PositivityViolation { .. })), "{r:?}");
    }

    #[test]
    fn decay_constants() {
        let g = BandGeometry::new(1, 32, 4).unwrap();
        let p = build_profile(&ProfileSpec::gaussian(), &g).unwrap();
        let c0 = p.decay_report(0);
        let direct = (1..32).map(|i| p.field()[i] * 4.0).fold(0.0, f64::max);
        assert_eq!(c0, direct);

        let a = build_profile(&ProfileSpec::gaussian(), &BandGeometry::new(1, 64, 4).unwrap()).unwrap();
        let b = build_profile(&ProfileSpec::gaussian(), &BandGeometry::new(1, 128, 4).unwrap()).unwrap();
        let (ca, cb) = (a.decay_report(4), b.decay_report(4));
        assert!(ca.is_finite() && ((ca - cb) / cb).abs() < 0.01, "{ca} {cb}");

        let u = VarianceProfile::uniform(&BandGeometry::new(1, 16, 16).unwrap());
        assert!((u.decay_report(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tail_is_negligible_beyond_six_widths() {
        for w in [4usize, 6] {
            let g = BandGeometry::new(1, 8 * w, w).unwrap();
            let p = build_profile(&ProfileSpec::gaussian(), &g).unwrap();
            assert!(p.tail_mass(6.0 * w as f64) <= 1e-8);
        }
    }

    #[test]
    fn narrow_bump_builds() {
        let g = BandGeometry::new(1, 64, 8).unwrap();
        let p = build_profile(&ProfileSpec::bump(1.0, 0.3), &g).unwrap();
        assert!(p.field().iter().all(|&v| v > 0.0));
    }
}
