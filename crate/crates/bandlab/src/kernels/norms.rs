use super::LatticeKernel;
use crate::error::{Error, Result};
use crate::window::ball_sum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelNorms {
    pub weak: f64,
    pub strong: f64,
}

/// Weak and strong `(a, b)` norms of the matrix `A_{xy} = K(y - x)`.
///
/// The supremum over box scales runs over the dyadic scales `K = 2^n W <= L/2`.
pub fn kernel_norms(k: &LatticeKernel, a: f64, b: f64) -> Result<KernelNorms> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("norm exponents must be positive, got ({a}, {b})")));
    }
    let geom = k.geometry();
    let lat = geom.lattice();
    let (w, d) = (geom.w() as f64, geom.d() as f64);
    let abs: Vec<f64> = k.values().iter().map(|v| v.norm()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);

    let strong = (0..lat.n())
        .map(|i| {
            let br = geom.bracket_index(i) as f64;
            (w / br).powf(b) * br.powf(a * d / 2.0) * abs[i]
        })
        .fold(0.0, f64::max);

    // |A_xy| + |A_yx| as a function of y - x.
    let both: Vec<f64> = (0..lat.n()).map(|i| abs[i] + abs[lat.neg_index(i)]).collect();
    let mut box_term: f64 = 0.0;
    let mut scale = geom.w();
    while 2 * scale <= lat.l() {
        let kf = scale as f64;
        let best = ball_sum(lat, &both, scale).into_iter().fold(0.0, f64::max);
        box_term = box_term.max((w / kf).powf(b) * kf.powf(a * d / 2.0) * best / kf.powf(d));
        scale *= 2;
    }
    Ok(KernelNorms { weak: w.powf(a * d / 2.0) * max + box_term, strong })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{b_field, KernelKind};
    use crate::torus::BandGeometry;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn listed_norms_of_b() {
        for (d, l, w) in [(1, 64, 4), (2, 32, 4), (3, 16, 2)] {
            let g = BandGeometry::new(d, l, w).unwrap();
            let b = b_field(&g);
            assert!(kernel_norms(&b, 2.0, 2.0).unwrap().strong <= 1.0 + 1e-12);
            let half = LatticeKernel::from_values(
                &g,
                KernelKind::Custom,
                b.values().iter().map(|v| C64::new(v.re.sqrt(), 0.0)).collect(),
                None,
            )
            .unwrap();
            assert!(kernel_norms(&half, 1.0, 1.0).unwrap().strong <= 1.0 + 1e-12);
        }
    }

    /// Weak norm is monotone in |A|, so the envelope `W^-b <x>^{b - ad/2}` of the
    /// strong unit ball bounds the weak norm of every field with strong norm <= 1.
    #[test]
    fn weak_is_controlled_by_strong() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (d, l, w) in [(1usize, 64usize, 4usize), (2, 24, 3)] {
            let g = BandGeometry::new(d, l, w).unwrap();
            for (a, b) in [(1.0, 1.0), (2.0, 2.0), (1.0, 2.0), (2.0, 4.0)] {
                let env: Vec<f64> = (0..g.n())
                    .map(|i| {
                        let br = g.bracket_index(i) as f64;
                        (w as f64).powf(-b) * br.powf(b - a * d as f64 / 2.0)
                    })
                    .collect();
                let env_k = LatticeKernel::from_values(
                    &g,
                    KernelKind::Custom,
                    env.iter().map(|&v| C64::new(v, 0.0)).collect(),
                    None,
                )
                .unwrap();
                let c_d = kernel_norms(&env_k, a, b).unwrap().weak;
                for _ in 0..10 {
                    let vals: Vec<C64> =
                        env.iter().map(|&e| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * e * 0.7).collect();
                    let k = LatticeKernel::from_values(&g, KernelKind::Custom, vals, None).unwrap();
                    let n = kernel_norms(&k, a, b).unwrap();
                    assert!(n.strong <= 1.0 + 1e-12);
                    assert!(n.weak <= c_d * n.strong * (1.0 + 1e-12), "{} {} {}", n.weak, c_d, n.strong);
                }
            }
        }
    }
}
