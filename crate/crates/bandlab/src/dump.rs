//! Binary dump of a sampled `H` and optionally its resolvent.
//!
//! Little-endian layout:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `b"BANDLAB\0"`                   |
//! | 8      | 4    | version (`u32`, currently 1)           |
//! | 12     | 4    | `d` (`u32`)                            |
//! | 16     | 4    | `L` (`u32`)                            |
//! | 20     | 4    | `W` (`u32`)                            |
//! | 24     | 4    | flags (`u32`, bit 0: `G` present)      |
//! | 28     | 16   | `z` as `(re, im)` `f64`                |
//! | 44     | 8    | seed (`u64`)                           |
//! | 52     | 8    | stream (`u64`)                         |
//! | 60     | 16N² | `H`, row-major `(re, im)` `f64` pairs  |
//! | ...    | 16N² | `G`, same layout, if flag bit 0 is set |

use crate::ensemble::{BandMatrixSample, CMatrix, ResolventFrame, RESOLVENT_CAP};
use crate::error::{Error, Result};
use crate::torus::BandGeometry;
use num_complex::Complex64 as C64;
use std::path::Path;

pub const DUMP_MAGIC: [u8; 8] = *b"BANDLAB\0";
pub const DUMP_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 60;
const FLAG_G: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub geometry: BandGeometry,
    /// Zero when no resolvent is stored.
    pub z: C64,
    pub seed: u64,
    pub stream: u64,
    pub h: CMatrix,
    pub g: Option<CMatrix>,
}

impl Dump {
    pub fn from_sample(sample: &BandMatrixSample) -> Self {
        Self {
            geometry: *sample.geometry(),
            z: C64::new(0.0, 0.0),
            seed: sample.seed(),
            stream: sample.stream(),
            h: sample.h().clone(),
            g: None,
        }
    }

    pub fn from_frame(frame: &ResolventFrame) -> Self {
        Self { z: frame.z(), g: Some(frame.g().clone()), ..Self::from_sample(frame.sample()) }
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &CMatrix) {
    for v in m.as_slice() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

pub fn encode_dump(dump: &Dump) -> Result<Vec<u8>> {
    let n = dump.geometry.n();
    if dump.h.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: dump.h.n() });
    }
    if let Some(g) = &dump.g {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
    }
    let blocks = if dump.g.is_some() { 2 } else { 1 };
    let mut out = Vec::with_capacity(HEADER_LEN + blocks * 16 * n * n);
    out.extend_from_slice(&DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    for v in [dump.geometry.d(), dump.geometry.l(), dump.geometry.w()] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidGeometry(format!("{v} does not fit the dump header")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let flags = if dump.g.is_some() { FLAG_G } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&dump.z.re.to_le_bytes());
    out.extend_from_slice(&dump.z.im.to_le_bytes());
    out.extend_from_slice(&dump.seed.to_le_bytes());
    out.extend_from_slice(&dump.stream.to_le_bytes());
    put_matrix(&mut out, &dump.h);
    if let Some(g) = &dump.g {
        put_matrix(&mut out, g);
    }
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("slice of 4"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("slice of 8"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("slice of 8"))
}

fn read_matrix(b: &[u8], n: usize, what: &str) -> Result<CMatrix> {
    let mut data = Vec::with_capacity(n * n);
    for (k, pair) in b.chunks_exact(16).enumerate() {
        let v = C64::new(f64_at(pair, 0), f64_at(pair, 8));
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Decode(format!("{what} entry ({}, {}) is not finite", k / n, k % n)));
        }
        data.push(v);
    }
    CMatrix::from_vec(n, data)
}

/// Validates magic, version, geometry, size cap, exact length, finiteness and
/// exact Hermitian symmetry of `H`.
pub fn decode_dump(bytes: &[u8]) -> Result<Dump> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode(format!("{} bytes is shorter than the {HEADER_LEN}-byte header", bytes.len())));
    }
    if bytes[..8] != DUMP_MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = u32_at(bytes, 8);
    if version != DUMP_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let (d, l, w) = (u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize, u32_at(bytes, 20) as usize);
    let flags = u32_at(bytes, 24);
    if flags & !FLAG_G != 0 {
        return Err(Error::Decode(format!("unknown flag bits {flags:#x}")));
    }
    let n = u32::try_from(d)
        .ok()
        .and_then(|d| l.checked_pow(d))
        .filter(|&n| n <= RESOLVENT_CAP)
        .ok_or_else(|| Error::Decode(format!("L^d for d = {d}, L = {l} exceeds the cap {RESOLVENT_CAP}")))?;
    let geometry = BandGeometry::new(d, l, w).map_err(|e| Error::Decode(e.to_string()))?;
    let z = C64::new(f64_at(bytes, 28), f64_at(bytes, 36));
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Decode("z is not finite".into()));
    }
    let has_g = flags & FLAG_G != 0;
    let block = 16 * n * n;
    let expected = HEADER_LEN + block * if has_g { 2 } else { 1 };
    if bytes.len() != expected {
        return Err(Error::Decode(format!("length {} does not match the expected {expected}", bytes.len())));
    }
    let h = read_matrix(&bytes[HEADER_LEN..HEADER_LEN + block], n, "H")?;
    for i in 0..n {
        for j in i..n {
            if h.get(i, j) != h.get(j, i).conj() {
                return Err(Error::Decode(format!("H is not Hermitian at ({i}, {j})")));
            }
        }
    }
    let g = if has_g {
        if !(z.im > 0.0) {
            return Err(Error::Decode("a stored resolvent needs Im z > 0".into()));
        }
        Some(read_matrix(&bytes[HEADER_LEN + block..], n, "G")?)
    } else {
        None
    };
    Ok(Dump { geometry, z, seed: u64_at(bytes, 44), stream: u64_at(bytes, 52), h, g })
}

pub fn write_dump(path: &Path, dump: &Dump) -> Result<()> {
    crate::io::write_atomic(path, &encode_dump(dump)?)
}

pub fn read_dump(path: &Path) -> Result<Dump> {
    decode_dump(&std::fs::read(path)?)
}
