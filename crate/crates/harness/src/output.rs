//! Output placement and atomic writes (temp file in the target directory,
//! then rename).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use straggler_core::cluster::RunTrace;
use tempfile::NamedTempFile;

use crate::error::HarnessError;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "STRAGGLER_OUTPUT_DIR";

pub fn output_dir(configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.map_or_else(|| PathBuf::from("out"), Path::to_path_buf),
    }
}

/// Write through `fill`; the target appears only if `fill` succeeds.
pub fn write_atomic_with<F>(path: &Path, fill: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), HarnessError>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = NamedTempFile::new_in(&dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    write_atomic_with(path, |w| Ok(w.write_all(bytes)?))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

/// Trace CSV: `t, sim_time_s, k_t, A_t, f_or_g, test_metric, alpha_t, notes`.
pub fn trace_csv(trace: &RunTrace) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "sim_time_s", "k_t", "A_t", "f_or_g", "test_metric", "alpha_t", "notes"])?;
    w.write_record(["0", "0e0", "", "", &fmt(trace.initial_objective), &fmt(trace.initial_metric), "", ""])?;
    for r in &trace.rows {
        w.write_record([
            r.t.to_string(),
            fmt(r.sim_time),
            r.k.to_string(),
            r.active_mask.clone(),
            fmt(r.objective),
            fmt(r.metric),
            fmt(r.alpha),
            r.notes.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_fill_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let r = write_atomic_with(&path, |w| {
            w.write_all(b"t,sim_time_s\n1,")?;
            Err(HarnessError::Numerical("injected crash".into()))
        });
        assert!(r.is_err());
        assert!(!path.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn failed_rewrite_keeps_old_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"old\n").unwrap();
        let _ = write_atomic_with(&path, |w| {
            w.write_all(b"ne")?;
            Err(HarnessError::Numerical("crash".into()))
        });
        assert_eq!(std::fs::read(&path).unwrap(), b"old\n");
    }
}
