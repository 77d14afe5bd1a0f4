//! Shared fixtures and the explicit-loop graph oracle.
#![allow(dead_code)]

use bandlab::ensemble::{resolvent, sample_h, ResolventFrame};
use bandlab::graphcalc::KernelSet;
use bandlab::kernels::{sminus_kernel, splus_kernel, theta_kernel};
use bandlab::profile::{build_profile, ProfileSpec, VarianceProfile};
use bandlab::spectral::{m_sc, SpectralPoint};
use bandlab::torus::BandGeometry;
use bandlab::C64;
use std::sync::Arc;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub struct Setup {
    pub profile: Arc<VarianceProfile>,
    pub point: SpectralPoint,
    pub kernels: KernelSet,
}

pub fn setup(d: usize, l: usize, w: usize, z: C64) -> Setup {
    let geom = BandGeometry::new(d, l, w).unwrap();
    let profile = Arc::new(build_profile(&ProfileSpec::gaussian(), &geom).unwrap());
    let point = m_sc(z).unwrap();
    let kernels = KernelSet::new(&profile, &point).unwrap();
    Setup { profile, point, kernels }
}

pub fn frame(s: &Setup, seed: u64) -> ResolventFrame {
    let sample = Arc::new(sample_h(&s.profile, seed).unwrap());
    resolvent(&sample, s.point.z).unwrap()
}

/// Independent nested-loop value of the catalog graph `name`.
pub fn oracle(name: &str, s: &Setup, f: Option<&ResolventFrame>, ext: &[(&str, usize)]) -> C64 {
    let n = s.kernels.geometry().n();
    let m = s.point.m;
    let mb = m.conj();
    let am2 = m.norm_sqr();
    let sp = splus_kernel(&s.profile, &s.point).unwrap();
    let sm = sminus_kernel(&s.profile, &s.point).unwrap();
    let th = theta_kernel(&s.profile, &s.point).unwrap();
    let sv = |a: usize, b: usize| c(s.profile.s(a, b), 0.0);
    let site = |k: &str| ext.iter().find(|(n, _)| *n == k).unwrap().1;
    match name {
        "E6.d'" => {
            let (x, y) = (site("x"), site("y"));
            if x != y {
                return c(0.0, 0.0);
            }
            m * m * sv(x, x) * sp.at(x, x)
        }
        "E6.h'" => {
            let (x, y) = (site("x"), site("y"));
            am2 * am2 * sv(y, y) * sv(x, y) * sm.at(x, y)
        }
        "E6.i4'" => {
            let (x, y) = (site("x"), site("y"));
            let mut acc = c(0.0, 0.0);
            for g1 in 0..n {
                acc += sv(y, g1) * sm.at(y, g1) * th.at(x, g1);
            }
            am2 * sm.at(x, y) * acc
        }
        "E6.i5'" => {
            let (x, y) = (site("x"), site("y"));
            let mut acc = c(0.0, 0.0);
            for al in 0..n {
                for g2 in 0..n {
                    acc += sm.at(x, al) * sm.at(y, al) * sm.at(al, g2) * sv(y, g2);
                }
            }
            am2 * mb * mb * sv(x, y) * acc
        }
        "E6.f4'" => {
            let (x, y) = (site("x"), site("y"));
            am2 * m * m * th.at(x, x) * sv(x, y) * sv(x, y)
        }
        "E6.f1.1'" => {
            let (x, y) = (site("x"), site("y"));
            am2 * am2 * sv(x, y) * sv(x, y) * th.at(x, y)
        }
        "A2.1" | "A2.2" => {
            let g = f.unwrap().g();
            let (a, b1, b2) = (site("a"), site("b1"), site("b2"));
            let mut acc = c(0.0, 0.0);
            for x in 0..n {
                for y in 0..n {
                    acc += if name == "A2.1" {
                        th.at(a, x) * sv(x, y) * (g.get(y, y) - m) * g.get(x, b1) * g.get(x, b2).conj()
                    } else {
                        th.at(a, x) * sv(x, y) * (g.get(x, x).conj() - mb) * g.get(y, b1) * g.get(y, b2).conj()
                    };
                }
            }
            m * acc
        }
        other => panic!("no oracle for {other}"),
    }
}
