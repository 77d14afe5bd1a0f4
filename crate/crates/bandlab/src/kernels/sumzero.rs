use super::LatticeKernel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumZeroReport {
    /// `|sum_x Theta_{0x} g(x - x0)|`.
    pub value: f64,
    /// `sum_x (x^2/|x0|^2)|g(x)| (|x0|^tau B_{0x0} 1[|x0| <= eta^{-1/2} W^{1+tau}] + |x0|^{-D})`.
    pub bound: f64,
    /// Box scale `K` of the support of `g`.
    pub scale: u64,
}

/// Pairs `Theta` with a compact, symmetric, sum-zero field `g` centred at `x0`.
///
/// `x^2` is the squared Euclidean norm of the representative and `|x0|` the torus distance.
pub fn sum_zero_smoothing(
    theta: &LatticeKernel,
    g: &[f64],
    x0: &[i64],
    tau: f64,
    big_d: f64,
) -> Result<SumZeroReport> {
    let geom = theta.geometry();
    let lat = geom.lattice();
    if g.len() != lat.n() {
        return Err(Error::DimensionMismatch { expected: lat.n(), got: g.len() });
    }
    let x0i = lat.index_of(x0)?;
    let sum: f64 = g.iter().sum();
    let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if sum.abs() > 1e-12 {
        return Err(Error::SumZeroViolation { sum });
    }
    if gmax == 0.0 {
        return Ok(SumZeroReport { value: 0.0, bound: 0.0, scale: geom.w() as u64 });
    }
    for i in 0..lat.n() {
        if (g[i] - g[lat.neg_index(i)]).abs() > 1e-14 * gmax {
            return Err(Error::SupportViolation("g must satisfy g(x) = g(-x)".into()));
        }
    }
    let support = (0..lat.n()).filter(|&i| g[i] != 0.0).map(|i| lat.norm_index(i)).max().unwrap_or(0);
    let scale = support.max(geom.w() as u64);
    if 2 * scale >= lat.l() as u64 {
        return Err(Error::SupportViolation(format!("support scale {scale} does not fit in the torus")));
    }
    let r0 = lat.norm_index(x0i);
    if (r0 as f64) < (scale as f64).powf(1.1) {
        return Err(Error::SupportViolation(format!("|x0| = {r0} is below K^1.1 for K = {scale}")));
    }

    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (u, &gu) in g.iter().enumerate() {
        if gu != 0.0 {
            acc += theta.values()[lat.add_index(u, x0i)] * gu;
        }
    }

    let eta = theta.point().map(|p| p.eta()).unwrap_or(0.0);
    let w = geom.w() as f64;
    let r0f = r0 as f64;
    let b0 = (geom.bracket_index(x0i) as f64).powi(-(geom.d() as i32 - 2)) / (w * w);
    let inside = eta <= 0.0 || r0f <= eta.powf(-0.5) * w.powf(1.0 + tau);
    let decay = if inside { r0f.powf(tau) * b0 } else { 0.0 } + r0f.powf(-big_d);
    let moment: f64 = g.iter().enumerate().map(|(u, gu)| lat.euclid2_index(u) / (r0f * r0f) * gu.abs()).sum();
    Ok(SumZeroReport { value: acc.norm(), bound: moment * decay, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::theta_kernel;
    use crate::profile::{build_profile, ProfileSpec};
    use crate::spectral::m_sc;
    use crate::torus::BandGeometry;
    use num_complex::Complex64 as C64;

    fn theta_d3() -> LatticeKernel {
        let g = BandGeometry::new(3, 40, 3).unwrap();
        let p = build_profile(&ProfileSpec::gaussian(), &g).unwrap();
        let eta = 9.0 / 40f64.powf(1.8);
        theta_kernel(&p, &m_sc(C64::new(0.0, eta)).unwrap()).unwrap()
    }

    #[test]
    fn second_difference_obeys_bound() {
        let theta = theta_d3();
        let lat = *theta.geometry().lattice();
        let mut g = vec![0.0; lat.n()];
        g[lat.index_of(&[2, 0, 0]).unwrap()] += 1.0;
        g[lat.index_of(&[-2, 0, 0]).unwrap()] += 1.0;
        g[0] -= 2.0;
        for x0 in [[16, 0, 0], [0, 16, 0], [16, 16, 0], [12, 9, 16]] {
            let r = sum_zero_smoothing(&theta, &g, &x0, 0.2, 10.0).unwrap();
            assert_eq!(r.scale, 3);
            assert!(r.value <= r.bound, "{x0:?}: {} > {}", r.value, r.bound);
        }
        let zero = vec![0.0; lat.n()];
        assert_eq!(sum_zero_smoothing(&theta, &zero, &[16, 0, 0], 0.2, 10.0).unwrap().value, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let theta = theta_d3();
        let lat = *theta.geometry().lattice();
        let mut delta = vec![0.0; lat.n()];
        delta[0] = 1.0;
        assert!(matches!(
            sum_zero_smoothing(&theta, &delta, &[16, 0, 0], 0.2, 10.0),
            Err(Error::SumZeroViolation { .. })
        ));
        let mut odd = vec![0.0; lat.n()];
        odd[lat.index_of(&[1, 0, 0]).unwrap()] = 1.0;
        odd[lat.index_of(&[-1, 0, 0]).unwrap()] = -1.0;
        assert!(matches!(sum_zero_smoothing(&theta, &odd, &[16, 0, 0], 0.2, 10.0), Err(Error::SupportViolation(_))));
        let mut g = vec![0.0; lat.n()];
        g[lat.index_of(&[2, 0, 0]).unwrap()] = 1.0;
        g[lat.index_of(&[-2, 0, 0]).unwrap()] = 1.0;
        g[0] = -2.0;
        assert!(matches!(sum_zero_smoothing(&theta, &g, &[1, 0, 0], 0.2, 10.0), Err(Error::SupportViolation(_))));
    }
}
