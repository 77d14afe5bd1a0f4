//! Discrete Fourier transform on `Z_L^d`.
//!
//! Convention: `K^(p) = sum_x K(x) e^{i p.x}` and
//! `K(x) = L^{-d} sum_p K^(p) e^{-i p.x}`, with arrays laid out as in
//! [`crate::torus`]. Small lattices use direct summation, larger ones a dense
//! transform along each axis in turn.

use crate::torus::TorusLattice;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Below this many sites the transform is a direct `N^2` sum.
pub const DIRECT_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sign {
    Plus,
    Minus,
}

fn twiddles(l: usize, sign: Sign) -> Vec<C64> {
    let s = if sign == Sign::Plus { 1.0 } else { -1.0 };
    (0..l).map(|t| C64::from_polar(1.0, s * 2.0 * PI * t as f64 / l as f64)).collect()
}

fn digits(lat: &TorusLattice, mut idx: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % lat.l();
        idx /= lat.l();
    }
}

fn direct(lat: &TorusLattice, input: &[C64], sign: Sign) -> Vec<C64> {
    let (n, l, d) = (lat.n(), lat.l(), lat.d());
    let tw = twiddles(l, sign);
    let mut dig = vec![vec![0usize; d]; n];
    for (i, row) in dig.iter_mut().enumerate() {
        digits(lat, i, row);
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        let dk = &dig[k];
        let mut acc = C64::new(0.0, 0.0);
        for (j, v) in input.iter().enumerate() {
            let phase = dk.iter().zip(&dig[j]).map(|(a, b)| a * b).sum::<usize>() % l;
            acc += v * tw[phase];
        }
        *o = acc;
    }
    out
}

fn by_axes(lat: &TorusLattice, input: &[C64], sign: Sign) -> Vec<C64> {
    let (n, l, d) = (lat.n(), lat.l(), lat.d());
    let tw = twiddles(l, sign);
    let mut data = input.to_vec();
    let mut line = vec![C64::new(0.0, 0.0); l];
    let mut res = vec![C64::new(0.0, 0.0); l];
    for axis in 0..d {
        let stride = l.pow((d - 1 - axis) as u32);
        let block = stride * l;
        for base in (0..n).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                for (k, r) in res.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    let mut t = 0usize;
                    for v in &line {
                        acc += v * tw[t];
                        t += k;
                        if t >= l {
                            t -= l;
                        }
                    }
                    *r = acc;
                }
                for (k, r) in res.iter().enumerate() {
                    data[start + k * stride] = *r;
                }
            }
        }
    }
    data
}

fn transform(lat: &TorusLattice, input: &[C64], sign: Sign) -> Vec<C64> {
    assert_eq!(input.len(), lat.n(), "field length must equal L^d");
    if lat.n() < DIRECT_LIMIT {
        direct(lat, input, sign)
    } else {
        by_axes(lat, input, sign)
    }
}

/// `K^(p) = sum_x K(x) e^{i p.x}`.
pub fn forward(lat: &TorusLattice, field: &[C64]) -> Vec<C64> {
    transform(lat, field, Sign::Plus)
}

/// `K(x) = L^{-d} sum_p K^(p) e^{-i p.x}`.
pub fn inverse(lat: &TorusLattice, symbol: &[C64]) -> Vec<C64> {
    let scale = 1.0 / lat.n() as f64;
    transform(lat, symbol, Sign::Minus).into_iter().map(|v| v * scale).collect()
}

pub fn forward_real(lat: &TorusLattice, field: &[f64]) -> Vec<C64> {
    let c: Vec<C64> = field.iter().map(|&v| C64::new(v, 0.0)).collect();
    forward(lat, &c)
}

/// Forward transform forced through the per-axis path, for cross-checks.
pub fn forward_by_axes(lat: &TorusLattice, field: &[C64]) -> Vec<C64> {
    by_axes(lat, field, Sign::Plus)
}

/// Forward transform forced through direct summation, for cross-checks.
pub fn forward_direct(lat: &TorusLattice, field: &[C64]) -> Vec<C64> {
    direct(lat, field, Sign::Plus)
}

/// Circular convolution `(a * b)(x) = sum_y a(y) b(x - y)`.
pub fn convolve(lat: &TorusLattice, a: &[C64], b: &[C64]) -> Vec<C64> {
    let fa = forward(lat, a);
    let fb = forward(lat, b);
    let prod: Vec<C64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    inverse(lat, &prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_has_flat_symbol() {
        let lat = TorusLattice::new(2, 6).unwrap();
        let mut f = vec![C64::new(0.0, 0.0); lat.n()];
        f[0] = C64::new(1.0, 0.0);
        for v in forward(&lat, &f) {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn shifted_delta_matches_phase() {
        let lat = TorusLattice::new(1, 7).unwrap();
        let x = lat.index_of(&[2]).unwrap();
        let mut f = vec![C64::new(0.0, 0.0); lat.n()];
        f[x] = C64::new(1.0, 0.0);
        let s = forward(&lat, &f);
        for (k, v) in s.iter().enumerate() {
            let p = lat.momentum(k)[0];
            assert!((v - C64::from_polar(1.0, 2.0 * p)).norm() < 1e-14);
        }
    }

    #[test]
    fn paths_agree_and_round_trip() {
        let lat = TorusLattice::new(3, 5).unwrap();
        let f: Vec<C64> =
            (0..lat.n()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let a = forward_direct(&lat, &f);
        let b = forward_by_axes(&lat, &f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-11);
        }
        let back = inverse(&lat, &a);
        for (x, y) in back.iter().zip(&f) {
            assert!((x - y).norm() < 1e-13);
        }
    }
}
