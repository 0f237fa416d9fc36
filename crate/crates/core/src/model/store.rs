//! File persistence: population and ledger JSON Lines, and whole-state snapshots.
//!
//! A snapshot is a header document on the first line followed by the
//! population lines and then the ledger lines, each in registration order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ledger::{HistoryRecord, Ledger};
use super::registry::{PopulationLine, Registry};
use super::space::AttributeSpace;
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "qaebac-state";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    space: serde_json::Value,
    subjects: usize,
    objects: usize,
    history: usize,
}

pub fn write_population(path: &Path, registry: &Registry) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in registry.population_lines() {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_population(path: &Path, space: Arc<AttributeSpace>) -> Result<Registry> {
    let mut registry = Registry::new(space);
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PopulationLine = serde_json::from_str(&line)
            .map_err(|e| Error::Corrupt(format!("population line {}: {e}", n + 1)))?;
        registry.load_population_line(rec)?;
    }
    Ok(registry)
}

pub fn write_ledger(path: &Path, ledger: &Ledger) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in ledger.records() {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ledger(path: &Path) -> Result<Ledger> {
    let mut ledger = Ledger::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: HistoryRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Corrupt(format!("ledger line {}: {e}", n + 1)))?;
        ledger.append(rec)?;
    }
    Ok(ledger)
}

/// Writes the attribute space, registries and ledger to one file.
pub fn snapshot(path: &Path, registry: &Registry, ledger: &Ledger) -> Result<()> {
    let header = Header {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        space: registry.space().to_value(),
        subjects: registry.subject_count(),
        objects: registry.object_count(),
        history: ledger.len(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for line in registry.population_lines() {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    for rec in ledger.records() {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Restores what [`snapshot`] wrote.
pub fn load(path: &Path) -> Result<(Registry, Ledger)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Corrupt("missing header".into()))??;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::Corrupt(format!("unknown format `{}`", header.format)));
    }
    if header.version != SNAPSHOT_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let space = Arc::new(AttributeSpace::from_value(header.space)?);
    let mut registry = Registry::new(space);
    let mut ledger = Ledger::new();

    let population = header.subjects + header.objects;
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if seen < population {
            let rec: PopulationLine = serde_json::from_str(&line)
                .map_err(|e| Error::Corrupt(format!("record {}: {e}", seen + 2)))?;
            registry.load_population_line(rec)?;
        } else if seen < population + header.history {
            let rec: HistoryRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Corrupt(format!("record {}: {e}", seen + 2)))?;
            ledger.append(rec)?;
        } else {
            return Err(Error::Corrupt("trailing records after declared counts".into()));
        }
        seen += 1;
    }
    if seen != population + header.history
        || registry.subject_count() != header.subjects
        || registry.object_count() != header.objects
    {
        return Err(Error::Corrupt(format!(
            "expected {} records, found {seen}",
            population + header.history
        )));
    }
    Ok((registry, ledger))
}
