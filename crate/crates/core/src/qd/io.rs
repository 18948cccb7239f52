//! Line-delimited JSON archive files: one header line, then one line per
//! elite and per threshold, in cell order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::archive::{Archive, ArchiveMode, ArchiveSpec, Elite};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveIoError {
    #[error("archive schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("corrupt archive file at line {line}: {message}")]
    CorruptFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Run metadata stored in the header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub scenario_hash: String,
    pub method: String,
    pub seed: u64,
    pub evaluations: u64,
    /// Method parameters as given.
    pub params: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    meta: RunMeta,
    spec: ArchiveSpec,
    mode: ArchiveMode,
    f_min: f64,
    sigma_st: f64,
    out_of_bounds: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Elite { cell: u64, elite: Box<Elite> },
    Threshold { cell: u64, value: f64 },
}

pub fn write_archive<W: Write>(archive: &Archive, meta: &RunMeta, mut out: W) -> std::io::Result<()> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        meta: meta.clone(),
        spec: archive.spec,
        mode: archive.mode,
        f_min: archive.f_min,
        sigma_st: archive.sigma_st,
        out_of_bounds: archive.out_of_bounds,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (cell, elite) in archive.elites() {
        serde_json::to_writer(&mut out, &Record::Elite { cell, elite: Box::new(elite.clone()) })?;
        out.write_all(b"\n")?;
    }
    for (cell, value) in archive.thresholds() {
        serde_json::to_writer(&mut out, &Record::Threshold { cell, value })?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn archive_to_string(archive: &Archive, meta: &RunMeta) -> String {
    let mut buf = Vec::new();
    write_archive(archive, meta, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_archive<R: BufRead>(input: R) -> Result<(Archive, RunMeta), ArchiveIoError> {
    let mut lines = input.lines().enumerate();
    let corrupt = |line: usize, message: String| ArchiveIoError::CorruptFile { line, message };
    let (_, first) = lines.next().ok_or_else(|| corrupt(1, "missing header".into()))?;
    let first = first?;
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| corrupt(1, e.to_string()))?;
    let found = raw.get("schema_version").and_then(|v| v.as_u64()).ok_or_else(|| corrupt(1, "header has no schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(ArchiveIoError::SchemaMismatch { found: found as u32, expected: SCHEMA_VERSION });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| corrupt(1, e.to_string()))?;
    let mut archive = Archive::new(header.spec, header.mode, header.sigma_st).with_f_min(header.f_min);
    archive.out_of_bounds = header.out_of_bounds;
    let total = header.spec.total_cells();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        match rec {
            Record::Elite { cell, elite } if cell < total => archive.restore(cell, *elite),
            Record::Threshold { cell, value } if cell < total => archive.restore_threshold(cell, value),
            _ => return Err(corrupt(i + 1, "cell index outside the archive".into())),
        }
    }
    Ok((archive, header.meta))
}

pub fn archive_from_str(text: &str) -> Result<(Archive, RunMeta), ArchiveIoError> {
    read_archive(text.as_bytes())
}
