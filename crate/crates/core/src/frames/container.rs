//! Binary frame container. Structured kinds store constructor parameters;
//! Gaussian frames also store their entries.
//!
//! Layout (little endian): magic `SFRM`, version u16, kind u8, then u64
//! fields n, rows, beta numerator, beta denominator, m, seed, four kind
//! parameters, the m+1 partition offsets, and for Gaussian frames the
//! row-major entries as f64.

use std::io::{Read, Write};

use super::construct::gaussian_from_entries;
use super::{Frame, FrameKind, FrameSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SFRM";
pub const VERSION: u16 = 1;

fn put(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn params(spec: &FrameSpec) -> [u64; 4] {
    match *spec {
        FrameSpec::Steiner { v, columns, split_blocks, .. } => {
            [v as u64, columns.map_or(0, |c| c as u64), split_blocks as u64, 0]
        }
        FrameSpec::HaarSubsampled { order, beta, .. } => [order as u64, beta, 0, 0],
        FrameSpec::HadamardRandomized { n, beta, .. } | FrameSpec::Gaussian { n, beta, .. } => {
            [n as u64, beta, 0, 0]
        }
        FrameSpec::Identity { n } => [n as u64, 0, 0, 0],
        FrameSpec::Replication { n, beta } => [n as u64, beta, 0, 0],
    }
}

fn spec_from(kind: FrameKind, p: [u64; 4], seed: u64) -> FrameSpec {
    let u = |x: u64| x as usize;
    match kind {
        FrameKind::Steiner => FrameSpec::Steiner {
            v: u(p[0]),
            columns: (p[1] != 0).then(|| u(p[1])),
            split_blocks: u(p[2]),
            seed,
        },
        FrameKind::HaarSubsampled => FrameSpec::HaarSubsampled { order: u(p[0]), beta: p[1], seed },
        FrameKind::HadamardRandomized => {
            FrameSpec::HadamardRandomized { n: u(p[0]), beta: p[1], seed }
        }
        FrameKind::Gaussian => FrameSpec::Gaussian { n: u(p[0]), beta: p[1], seed },
        FrameKind::Identity => FrameSpec::Identity { n: u(p[0]) },
        FrameKind::Replication => FrameSpec::Replication { n: u(p[0]), beta: p[1] },
    }
}

pub fn write_frame<T: Scalar>(frame: &Frame<T>, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[frame.kind().code()])?;
    for x in [
        frame.n() as u64,
        frame.rows() as u64,
        *frame.beta().numer(),
        *frame.beta().denom(),
        frame.m() as u64,
        frame.seed(),
    ] {
        put(w, x)?;
    }
    for p in params(frame.spec()) {
        put(w, p)?;
    }
    for &o in frame.partition().offsets() {
        put(w, o as u64)?;
    }
    if let Some(entries) = frame.dense_entries() {
        for &x in entries.data() {
            w.write_all(&x.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_frame<T: Scalar>(r: &mut impl Read) -> Result<Frame<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut ver = [0u8; 2];
    r.read_exact(&mut ver)?;
    let version = u16::from_le_bytes(ver);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let mut kb = [0u8; 1];
    r.read_exact(&mut kb)?;
    let kind = FrameKind::from_code(kb[0])
        .ok_or_else(|| Error::Format(format!("unknown frame kind code {}", kb[0])))?;
    let n = get(r)? as usize;
    let rows = get(r)? as usize;
    let (num, den) = (get(r)?, get(r)?);
    let m = get(r)? as usize;
    let seed = get(r)?;
    let mut p = [0u64; 4];
    for x in &mut p {
        *x = get(r)?;
    }
    let mut offsets = Vec::with_capacity(m + 1);
    for _ in 0..=m {
        offsets.push(get(r)? as usize);
    }
    let spec = spec_from(kind, p, seed);
    let frame = if kind == FrameKind::Gaussian {
        let mut data = Vec::with_capacity(rows * n);
        let mut b = [0u8; 8];
        for _ in 0..rows * n {
            r.read_exact(&mut b)?;
            data.push(T::of(f64::from_le_bytes(b)));
        }
        gaussian_from_entries(Matrix::from_vec(rows, n, data)?, p[1], seed, m)?
    } else {
        spec.build(m)?
    };
    if frame.n() != n
        || frame.rows() != rows
        || *frame.beta().numer() != num
        || *frame.beta().denom() != den
        || frame.partition().offsets() != offsets.as_slice()
    {
        return Err(Error::Format("header does not match the rebuilt frame".into()));
    }
    Ok(frame)
}
