//! Infinite-volume limits `(2 pi)^{-d} int symbol(p) e^{i p.x} dp` at `eta = 0`.

use crate::error::{Error, Result};
use crate::profile::ProfileSpec;
use crate::spectral::m_sc;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteKind {
    Splus,
    Sminus,
    Theta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Stop when successive extrapolated estimates differ by less than this, relatively.
    pub rel_tol: f64,
    /// Absolute slack added to the stopping test, for entries that vanish.
    pub abs_tol: f64,
    /// Upper bound on quadrature nodes per refinement level.
    pub max_nodes: usize,
    /// Number of dyadic shells around `p = 0`; `None` picks a default per kind.
    pub shells: Option<usize>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-6, abs_tol: 1e-15, max_nodes: 50_000_000, shells: None }
    }
}

/// Corner and side of the boxes tiling `[-pi, pi]^d`: dyadic shells
/// `[-h_j, h_j]^d \ [-h_{j+1}, h_{j+1}]^d` with `h_j = pi 2^{-j}`, then the innermost cube.
fn tiling(d: usize, shells: usize) -> Vec<(Vec<f64>, f64)> {
    let mut boxes = Vec::new();
    let mut h = PI;
    for _ in 0..shells {
        let side = h / 2.0;
        for code in 0..4usize.pow(d as u32) {
            let mut c = code;
            let mut corner = vec![0.0; d];
            let mut central = true;
            for slot in corner.iter_mut() {
                let k = c % 4;
                c /= 4;
                central &= k == 1 || k == 2;
                *slot = -h + k as f64 * side;
            }
            if !central {
                boxes.push((corner, side));
            }
        }
        h = side;
    }
    boxes.push((vec![-h; d], 2.0 * h));
    boxes
}

fn midpoint(boxes: &[(Vec<f64>, f64)], n: usize, x: &[f64], f: &dyn Fn(f64) -> C64) -> C64 {
    let d = x.len();
    let mut total = C64::new(0.0, 0.0);
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0; d];
    for (corner, side) in boxes {
        let step = side / n as f64;
        let weight = step.powi(d as i32);
        let mut acc = C64::new(0.0, 0.0);
        idx.iter_mut().for_each(|v| *v = 0);
        loop {
            let mut q2 = 0.0;
            let mut phase = 0.0;
            for k in 0..d {
                p[k] = corner[k] + (idx[k] as f64 + 0.5) * step;
                q2 += p[k] * p[k];
                phase += p[k] * x[k];
            }
            acc += f(q2) * phase.cos();
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        total += acc * weight;
    }
    total / (2.0 * PI).powi(d as i32)
}

/// Infinite-space kernel entry at displacement `x` for the profile family `spec`
/// with band width `w` in dimension `d`.
///
/// The symbol is even, so only `cos(p.x)` contributes. Tensor midpoint rules on
/// a dyadic tiling are refined by doubling the nodes per axis and extrapolated
/// Romberg-style; successive diagonal entries must agree to `rel_tol`.
pub fn kernel_infinite_limit(
    spec: &ProfileSpec,
    d: usize,
    w: usize,
    kind: InfiniteKind,
    e: f64,
    x: &[i64],
    opts: &QuadratureOptions,
) -> Result<C64> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if kind == InfiniteKind::Theta && d < 3 {
        return Err(Error::DimensionTooLow { d, min: 3 });
    }
    spec.validate()?;
    let m = m_sc(C64::new(e, 0.0))?.m;
    let m2 = m * m;
    let w2 = (w as f64).powi(2);
    let symbol = |q2: f64| -> C64 {
        match kind {
            InfiniteKind::Splus | InfiniteKind::Sminus => {
                let s = spec.psi_radial(w2 * q2);
                m2 * s / (1.0 - m2 * s)
            }
            InfiniteKind::Theta => {
                C64::new(spec.psi_radial(w2 * q2) / spec.one_minus_psi_radial(w2 * q2), 0.0)
            }
        }
    };
    let shells = opts.shells.unwrap_or(if kind == InfiniteKind::Theta { 24 } else { 2 });
    let boxes = tiling(d, shells);
    let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();

    // Romberg table over the midpoint sequence n = 2, 4, 8, ...
    let mut n = 2usize;
    let mut rows: Vec<Vec<C64>> = vec![vec![midpoint(&boxes, n, &xf, &symbol)]];
    loop {
        n *= 2;
        let nodes = boxes.len().saturating_mul(n.saturating_pow(d as u32));
        if nodes > opts.max_nodes {
            return Err(Error::NonConvergence(format!(
                "{kind:?} at x = {x:?}: {nodes} nodes per level exceed the cap {}",
                opts.max_nodes
            )));
        }
        let prev = rows.last().expect("table is never empty");
        let mut row = vec![midpoint(&boxes, n, &xf, &symbol)];
        for j in 1..=prev.len() {
            let f = 4f64.powi(j as i32);
            row.push((row[j - 1] * f - prev[j - 1]) / (f - 1.0));
        }
        let (best, before) = (row[row.len() - 1], prev[prev.len() - 1]);
        if rows.len() >= 2 && (best - before).norm() <= opts.rel_tol * best.norm() + opts.abs_tol {
            return Ok(if kind == InfiniteKind::Sminus { best.conj() } else { best });
        }
        rows.push(row);
    }
}
