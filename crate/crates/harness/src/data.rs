//! Dataset container: `SDAT`, version, rows, cols, row-major `X`, then the
//! response vector, all little-endian.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use straggler_core::linalg::Matrix;

use crate::config::ProblemSpec;
use crate::error::HarnessError;
use crate::experiment::Instance;
use crate::output::{write_atomic_with, write_json};

const MAGIC: &[u8; 4] = b"SDAT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix<f64>,
    /// Empty for problems without a response (logistic, folded labels).
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub problem: ProblemSpec,
    pub data_seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Planted model, or the exact optimum for ridge.
    pub reference: Vec<f64>,
}

pub fn dataset_of(instance: &Instance) -> (Dataset, Vec<f64>) {
    match instance {
        Instance::Data { problem, truth, .. } => {
            (Dataset { x: problem.x().clone(), y: problem.y().to_vec() }, truth.clone())
        }
        Instance::Model { problem, truth, .. } => {
            let y = match problem.phi() {
                straggler_core::loss::Phi::LeastSquares { y } => y.clone(),
                _ => Vec::new(),
            };
            (Dataset { x: problem.x().clone(), y }, truth.clone())
        }
    }
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<(), HarnessError> {
    write_atomic_with(path, |w| {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(d.x.rows() as u64).to_le_bytes())?;
        w.write_all(&(d.x.cols() as u64).to_le_bytes())?;
        w.write_all(&(d.y.len() as u64).to_le_bytes())?;
        for v in d.x.data().iter().chain(&d.y) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

fn read_u64(r: &mut impl Read) -> Result<u64, HarnessError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, len: usize) -> Result<Vec<f64>, HarnessError> {
    let mut buf = vec![0u8; len * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, HarnessError> {
    let bad = |m: &str| HarnessError::Config(format!("{}: {m}", path.display()));
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a dataset container"));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(bad("unsupported container version"));
    }
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    let ylen = read_u64(&mut r)? as usize;
    let x = read_f64s(&mut r, rows.checked_mul(cols).ok_or_else(|| bad("size overflow"))?)?;
    let y = read_f64s(&mut r, ylen)?;
    let x = Matrix::from_vec(rows, cols, x).map_err(|e| bad(&e.to_string()))?;
    Ok(Dataset { x, y })
}

/// CSV with the response first (when present), then the columns of `X`.
pub fn write_dataset_csv(path: &Path, d: &Dataset) -> Result<(), HarnessError> {
    write_atomic_with(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = Vec::new();
        if !d.y.is_empty() {
            header.push("y".into());
        }
        header.extend((0..d.x.cols()).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        for i in 0..d.x.rows() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if !d.y.is_empty() {
                rec.push(format!("{:e}", d.y[i]));
            }
            rec.extend(d.x.row(i).iter().map(|v| format!("{v:e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn write_sidecar(path: &Path, s: &Sidecar) -> Result<(), HarnessError> {
    write_json(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let d = Dataset {
            x: Matrix::from_fn(3, 2, |i, j| i as f64 - 0.25 * j as f64),
            y: vec![1.0, -2.5, f64::MIN_POSITIVE],
        };
        write_dataset(&path, &d).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), d);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        std::fs::write(&path, b"SFRM\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_dataset(&path), Err(HarnessError::Config(_))));
    }
}
