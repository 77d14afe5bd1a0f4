//! Semicircle transform `m(z)` and derived scalars.
//!
//! In the bulk, `1 - |m|^2 = eta |m|^2 / Im m`, and for `0 < eta <= 1`
//! this lies between `eta / 2` and `eta / r(E)`.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: C64,
    pub m: C64,
    /// `sqrt(4 - E^2)/2` for `|E| <= 2`, zero outside.
    pub r: f64,
    pub absm2: f64,
    /// `|m|^2 / (1 - |m|^2)`; `None` on the real axis.
    pub theta_mass: Option<f64>,
}

impl SpectralPoint {
    pub fn e(&self) -> f64 {
        self.z.re
    }

    pub fn eta(&self) -> f64 {
        self.z.im
    }
}

pub fn r_of_e(e: f64) -> Result<f64> {
    if !(e.abs() <= 2.0) {
        return Err(Error::OutsideBulk(format!("r(E) needs |E| <= 2, got E = {e}")));
    }
    Ok(0.5 * (4.0 - e * e).max(0.0).sqrt())
}

/// Root of `m^2 + z m + 1 = 0` with `Im m > 0`.
pub fn m_sc(z: C64) -> Result<SpectralPoint> {
    let (e, eta) = (z.re, z.im);
    if !(eta >= 0.0) || !e.is_finite() || !eta.is_finite() {
        return Err(Error::OutsideBulk(format!("need finite z with Im z >= 0, got {z}")));
    }
    let m = if eta == 0.0 {
        if e.abs() >= 2.0 {
            return Err(Error::OutsideBulk(format!("boundary value needs |E| < 2, got E = {e}")));
        }
        C64::new(-0.5 * e, 0.5 * (4.0 - e * e).sqrt())
    } else {
        // The roots multiply to 1; take the large one without cancellation, invert it.
        let s = (z * z - 4.0).sqrt();
        let big = if (z.conj() * s).re >= 0.0 { (-z - s) * 0.5 } else { (-z + s) * 0.5 };
        let mut m = big.inv();
        if m.im <= 0.0 {
            m = big;
        }
        // One Newton step on the quadratic.
        m - (m * m + z * m + 1.0) / (2.0 * m + z)
    };
    let absm2 = m.norm_sqr();
    let r = if e.abs() <= 2.0 { r_of_e(e)? } else { 0.0 };
    let theta_mass = (eta > 0.0).then(|| absm2 / (1.0 - absm2));
    Ok(SpectralPoint { z, m, r, absm2, theta_mass })
}

/// Relative residual of `|m|^2/(1-|m|^2) = Im m / eta`.
pub fn mass_identity_residual(p: &SpectralPoint) -> Result<f64> {
    let lhs = p.theta_mass.ok_or_else(|| Error::Precondition("mass identity needs eta > 0".into()))?;
    let rhs = p.m.im / p.eta();
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// Self-consistency residual `|(z + m) m + 1|`.
pub fn self_consistency_residual(p: &SpectralPoint) -> f64 {
    ((p.z + p.m) * p.m + 1.0).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Midpoint quadrature of `int rho(x)/(x - z) dx` with the semicircle density.
    fn stieltjes_oracle(z: C64) -> C64 {
        let n = 200_000;
        let h = std::f64::consts::PI / n as f64;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            let t = (k as f64 + 0.5) * h;
            let x = 2.0 * t.cos();
            let rho = (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI);
            acc += rho / (x - z) * (2.0 * t.sin()) * h;
        }
        acc
    }

    #[test]
    fn imaginary_axis_values() {
        let p = m_sc(C64::new(0.0, 1.0)).unwrap();
        assert!((p.m - C64::new(0.0, 0.6180339887498949)).norm() < 1e-12);
        assert!((p.m - stieltjes_oracle(C64::new(0.0, 1.0))).norm() < 1e-8);
        let p = m_sc(C64::new(0.0, 2.0)).unwrap();
        assert!((p.m - C64::new(0.0, 2f64.sqrt() - 1.0)).norm() < 1e-12);
        assert!((p.m - stieltjes_oracle(C64::new(0.0, 2.0))).norm() < 1e-8);
    }

    #[test]
    fn off_axis_matches_quadrature() {
        for z in [C64::new(0.5, 0.2), C64::new(-1.3, 0.7), C64::new(2.5, 0.1)] {
            let p = m_sc(z).unwrap();
            assert!((p.m - stieltjes_oracle(z)).norm() < 1e-6, "{z}");
            assert!(self_consistency_residual(&p) <= 1e-12);
        }
    }

    #[test]
    fn boundary_values() {
        for e in [-1.9, -0.4, 0.0, 1.0, 1.7] {
            let p = m_sc(C64::new(e, 0.0)).unwrap();
            assert!((p.m.norm() - 1.0).abs() < 1e-14);
            assert!((p.m.im - r_of_e(e).unwrap()).abs() < 1e-14);
            assert!(p.theta_mass.is_none());
        }
        assert!(matches!(m_sc(C64::new(2.0, 0.0)), Err(Error::OutsideBulk(_))));
        assert!(matches!(m_sc(C64::new(-3.0, 0.0)), Err(Error::OutsideBulk(_))));
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_of_e(0.0).unwrap(), 1.0);
        assert_eq!(r_of_e(2.0).unwrap(), 0.0);
        assert_eq!(r_of_e(-2.0).unwrap(), 0.0);
        assert!((r_of_e(1.0).unwrap() - 0.8660254037844386).abs() < 1e-15);
        assert!(r_of_e(2.1).is_err());
    }

    #[test]
    fn mass_identity() {
        let p = m_sc(C64::new(0.0, 1.0)).unwrap();
        assert!((p.theta_mass.unwrap() - 0.6180339887498949).abs() < 1e-12);
        assert!(mass_identity_residual(&p).unwrap() <= 1e-10);
        assert!(mass_identity_residual(&m_sc(C64::new(0.5, 0.2)).unwrap()).unwrap() <= 1e-10);
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                let z = C64::new(-1.8 + 0.4 * i as f64, 0.01 + 0.2 * j as f64);
                worst = worst.max(mass_identity_residual(&m_sc(z).unwrap()).unwrap());
            }
        }
        assert!(worst <= 1e-10, "{worst}");
        assert!(mass_identity_residual(&m_sc(C64::new(0.0, 0.0)).unwrap()).is_err());
    }

    #[test]
    fn parity_in_e() {
        for e in [0.1, 0.7, 1.5] {
            for eta in [0.05, 0.5, 2.0] {
                let a = m_sc(C64::new(e, eta)).unwrap().m;
                let b = m_sc(C64::new(-e, eta)).unwrap().m;
                assert!((a.re + b.re).abs() < 1e-14 && (a.im - b.im).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn modulus_increases_as_eta_decreases() {
        for e in [-1.5, 0.0, 0.9] {
            let mut prev = 0.0;
            for k in (0..12).rev() {
                let eta = 2f64.powi(k - 10);
                let a = m_sc(C64::new(e, eta)).unwrap().absm2;
                assert!(a < 1.0 && a > prev);
                prev = a;
            }
        }
    }

    /// `(1 - |m|^2)/eta = |m|^2 / Im m`, which stays between `|m(E+i)|^2/Im m(E+i)`
    /// and `1/r(E)` for `0 < eta <= 1`.
    #[test]
    fn mass_gap_is_linear_in_eta() {
        for e in [-1.5, 0.0, 0.9] {
            let at_one = m_sc(C64::new(e, 1.0)).unwrap();
            let c = at_one.absm2 / at_one.m.im;
            let big_c = 1.0 / r_of_e(e).unwrap();
            for k in 0..20 {
                let eta = 0.7f64.powi(k);
                let a = m_sc(C64::new(e, eta)).unwrap().absm2;
                let ratio = (1.0 - a) / eta;
                assert!(ratio >= c * (1.0 - 1e-12) && ratio <= big_c * (1.0 + 1e-12), "{e} {eta}");
            }
        }
    }
}
