//! Separable reductions over `l_inf` balls on the torus.

use crate::torus::TorusLattice;

#[derive(Clone, Copy)]
enum Op {
    Sum,
    Max,
}

fn reduce(lat: &TorusLattice, field: &[f64], radius: usize, op: Op) -> Vec<f64> {
    let (n, l, d) = (lat.n(), lat.l(), lat.d());
    assert_eq!(field.len(), n);
    let mut data = field.to_vec();
    let mut line = vec![0.0; l];
    // A ball of radius >= L/2 along one axis covers the whole line.
    let full = 2 * radius + 1 >= l;
    for axis in 0..d {
        let stride = l.pow((d - 1 - axis) as u32);
        let block = stride * l;
        for base in (0..n).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                for k in 0..l {
                    let v = if full {
                        match op {
                            Op::Sum => line.iter().sum(),
                            Op::Max => line.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        }
                    } else {
                        let mut acc = match op {
                            Op::Sum => 0.0,
                            Op::Max => f64::NEG_INFINITY,
                        };
                        for t in 0..=2 * radius {
                            let j = (k + l * (radius + 1) + t - radius) % l;
                            acc = match op {
                                Op::Sum => acc + line[j],
                                Op::Max => acc.max(line[j]),
                            };
                        }
                        acc
                    };
                    data[start + k * stride] = v;
                }
            }
        }
    }
    data
}

/// `out(c) = sum_{|u - c| <= radius} field(u)`.
pub fn ball_sum(lat: &TorusLattice, field: &[f64], radius: usize) -> Vec<f64> {
    reduce(lat, field, radius, Op::Sum)
}

/// `out(c) = max_{|u - c| <= radius} field(u)`.
pub fn ball_max(lat: &TorusLattice, field: &[f64], radius: usize) -> Vec<f64> {
    reduce(lat, field, radius, Op::Max)
}

/// Number of distinct sites in an `l_inf` ball of the given radius.
pub fn ball_volume(lat: &TorusLattice, radius: usize) -> usize {
    (2 * radius + 1).min(lat.l()).pow(lat.d() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let lat = TorusLattice::new(2, 7).unwrap();
        let f: Vec<f64> = (0..lat.n()).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        for r in [0usize, 1, 2, 3, 5] {
            let s = ball_sum(&lat, &f, r);
            let m = ball_max(&lat, &f, r);
            for c in 0..lat.n() {
                let inside: Vec<usize> =
                    (0..lat.n()).filter(|&u| lat.norm_index(lat.sub_index(u, c)) as usize <= r).collect();
                let bs: f64 = inside.iter().map(|&u| f[u]).sum();
                let bm = inside.iter().map(|&u| f[u]).fold(f64::NEG_INFINITY, f64::max);
                assert!((s[c] - bs).abs() < 1e-12);
                assert_eq!(m[c], bm);
                assert_eq!(inside.len(), ball_volume(&lat, r));
            }
        }
    }
}
