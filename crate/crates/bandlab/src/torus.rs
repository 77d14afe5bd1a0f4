//! Periodic lattice geometry on the torus `Z_L^d`.
//!
//! Sites are stored by their linear index. The index is row-major over
//! per-axis digits `k = v mod L` in `0..L`, first axis most significant, so
//! index 0 is the origin and digit `k` stands for the representative of `k`
//! in `(-L/2, L/2]`. Momentum arrays use the same layout with `p = 2 pi k / L`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLattice {
    d: usize,
    l: usize,
    n: usize,
}

impl TorusLattice {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidGeometry("dimension d must be positive".into()));
        }
        if l < 2 {
            return Err(Error::InvalidGeometry(format!("side L = {l} must be at least 2")));
        }
        let n = u32::try_from(d)
            .ok()
            .and_then(|d32| l.checked_pow(d32))
            .filter(|&n| i64::try_from(n).is_ok())
            .ok_or_else(|| Error::InvalidGeometry(format!("L^d overflows for L = {l}, d = {d}")))?;
        Ok(Self { d, l, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of sites `L^d`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Representative of `v mod L` in `(-L/2, L/2]`.
    pub fn wrap_coord(&self, v: i64) -> i64 {
        let l = self.l as i64;
        let r = v.rem_euclid(l);
        if 2 * r > l {
            r - l
        } else {
            r
        }
    }

    fn check_len(&self, v: &[i64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: v.len() });
        }
        Ok(())
    }

    pub fn wrap(&self, v: &[i64]) -> Result<Vec<i64>> {
        self.check_len(v)?;
        Ok(v.iter().map(|&c| self.wrap_coord(c)).collect())
    }

    /// `l_inf` torus distance `||x - y||_L`.
    pub fn dist(&self, x: &[i64], y: &[i64]) -> Result<u64> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(x.iter()
            .zip(y)
            .map(|(&a, &b)| self.wrap_coord(a - b).unsigned_abs())
            .max()
            .unwrap_or(0))
    }

    /// Linear index of the site `v` (wrapped first).
    pub fn index_of(&self, v: &[i64]) -> Result<usize> {
        self.check_len(v)?;
        let l = self.l as i64;
        Ok(v.iter().fold(0usize, |acc, &c| acc * self.l + c.rem_euclid(l) as usize))
    }

    /// Representative coordinates of site `idx`.
    pub fn site(&self, idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.d];
        self.site_into(idx, &mut out);
        out
    }

    pub fn site_into(&self, mut idx: usize, out: &mut [i64]) {
        debug_assert!(idx < self.n);
        for slot in out.iter_mut().rev() {
            let k = (idx % self.l) as i64;
            idx /= self.l;
            *slot = self.wrap_coord(k);
        }
    }

    /// Index of the displacement `site(i) - site(j)`.
    pub fn sub_index(&self, mut i: usize, mut j: usize) -> usize {
        let mut out = 0;
        let mut stride = 1;
        for _ in 0..self.d {
            let (a, b) = (i % self.l, j % self.l);
            i /= self.l;
            j /= self.l;
            out += ((a + self.l - b) % self.l) * stride;
            stride *= self.l;
        }
        out
    }

    /// Index of `site(i) + site(j)`.
    pub fn add_index(&self, mut i: usize, mut j: usize) -> usize {
        let mut out = 0;
        let mut stride = 1;
        for _ in 0..self.d {
            let (a, b) = (i % self.l, j % self.l);
            i /= self.l;
            j /= self.l;
            out += ((a + b) % self.l) * stride;
            stride *= self.l;
        }
        out
    }

    /// Index of `-site(i)`.
    pub fn neg_index(&self, i: usize) -> usize {
        self.sub_index(0, i)
    }

    /// Distance from the origin of site `i`.
    pub fn norm_index(&self, mut i: usize) -> u64 {
        let mut best = 0;
        for _ in 0..self.d {
            let k = (i % self.l) as i64;
            i /= self.l;
            best = best.max(self.wrap_coord(k).unsigned_abs());
        }
        best
    }

    /// `x_i x_j` averaged over both representatives `+-L/2` of an antipodal
    /// coordinate, so that odd moments of even fields vanish for even `L`.
    pub fn moment_product(&self, x: &[i64], i: usize, j: usize) -> f64 {
        if i == j {
            return (x[i] * x[i]) as f64;
        }
        let half = self.l % 2 == 0 && (2 * x[i] == self.l as i64 || 2 * x[j] == self.l as i64);
        if half {
            0.0
        } else {
            (x[i] * x[j]) as f64
        }
    }

    /// Squared Euclidean norm of the representative of site `i`.
    pub fn euclid2_index(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        for _ in 0..self.d {
            let k = (i % self.l) as i64;
            i /= self.l;
            let c = self.wrap_coord(k) as f64;
            s += c * c;
        }
        s
    }

    pub fn momentum(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.momentum_into(idx, &mut out);
        out
    }

    pub fn momentum_into(&self, idx: usize, out: &mut [f64]) {
        let mut coords = vec![0i64; self.d];
        self.site_into(idx, &mut coords);
        for (o, c) in out.iter_mut().zip(coords) {
            *o = 2.0 * PI * c as f64 / self.l as f64;
        }
    }

    /// All `L^d` momenta, in index order.
    pub fn momenta(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.momentum(i)).collect()
    }

    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.n).map(move |i| self.site(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandGeometry {
    lattice: TorusLattice,
    w: usize,
}

impl BandGeometry {
    pub fn new(d: usize, l: usize, w: usize) -> Result<Self> {
        let lattice = TorusLattice::new(d, l)?;
        Self::from_lattice(lattice, w)
    }

    pub fn from_lattice(lattice: TorusLattice, w: usize) -> Result<Self> {
        if w == 0 || w > lattice.l() {
            return Err(Error::InvalidGeometry(format!(
                "band width W = {w} must satisfy 1 <= W <= L = {}",
                lattice.l()
            )));
        }
        Ok(Self { lattice, w })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn d(&self) -> usize {
        self.lattice.d()
    }

    pub fn l(&self) -> usize {
        self.lattice.l()
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// `<x - y> = ||x - y||_L + W`.
    pub fn bracket(&self, x: &[i64], y: &[i64]) -> Result<u64> {
        Ok(self.lattice.dist(x, y)? + self.w as u64)
    }

    pub fn bracket_index(&self, i: usize) -> u64 {
        self.lattice.norm_index(i) + self.w as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        let t = TorusLattice::new(1, 10).unwrap();
        assert_eq!(t.wrap(&[7]).unwrap(), vec![-3]);
        assert_eq!(t.wrap(&[5]).unwrap(), vec![5]);
        assert_eq!(t.wrap(&[-5]).unwrap(), vec![5]);
        assert!(matches!(t.wrap(&[1, 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dist_examples() {
        let t = TorusLattice::new(2, 8).unwrap();
        assert_eq!(t.dist(&[7, 1], &[0, 0]).unwrap(), 1);
        assert_eq!(t.dist(&[3, 5], &[3, 5]).unwrap(), 0);
        assert_eq!(t.dist(&[4, 4], &[0, 0]).unwrap(), 4);
    }

    #[test]
    fn bracket_examples() {
        let g = BandGeometry::new(1, 16, 4).unwrap();
        assert_eq!(g.bracket(&[3], &[0]).unwrap(), 7);
        assert_eq!(g.bracket(&[5], &[5]).unwrap(), 4);
        let g = BandGeometry::new(1, 16, 2).unwrap();
        assert_eq!(g.bracket(&[9], &[0]).unwrap(), 9);
    }

    #[test]
    fn momenta_examples() {
        let t = TorusLattice::new(1, 2).unwrap();
        let mut p: Vec<f64> = t.momenta().into_iter().map(|v| v[0]).collect();
        p.sort_by(f64::total_cmp);
        assert_eq!(p, vec![0.0, PI]);

        let t = TorusLattice::new(1, 4).unwrap();
        let mut p: Vec<f64> = t.momenta().into_iter().map(|v| v[0]).collect();
        p.sort_by(f64::total_cmp);
        assert_eq!(p, vec![-PI / 2.0, 0.0, PI / 2.0, PI]);

        for (d, l) in [(1, 5), (2, 3), (3, 4)] {
            let t = TorusLattice::new(d, l).unwrap();
            let m = t.momenta();
            assert_eq!(m.len(), l.pow(d as u32));
            assert!(m.iter().any(|p| p.iter().all(|&c| c == 0.0)));
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(TorusLattice::new(0, 4).is_err());
        assert!(TorusLattice::new(1, 1).is_err());
        assert!(TorusLattice::new(64, 1 << 20).is_err());
        assert!(BandGeometry::new(1, 8, 9).is_err());
        assert!(BandGeometry::new(1, 8, 0).is_err());
    }

    #[test]
    fn index_helpers_agree_with_coordinates() {
        let t = TorusLattice::new(2, 5).unwrap();
        for i in 0..t.n() {
            for j in 0..t.n() {
                let (x, y) = (t.site(i), t.site(j));
                let diff: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let sum: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                assert_eq!(t.sub_index(i, j), t.index_of(&diff).unwrap());
                assert_eq!(t.add_index(i, j), t.index_of(&sum).unwrap());
                assert_eq!(t.norm_index(t.sub_index(i, j)), t.dist(&x, &y).unwrap());
            }
        }
    }
}
