//! On-disk formats shared by the pipeline stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::{FaultEvent, PValueSeries};
use crate::error::{Error, Result};
use crate::signal::{DatasetConfig, FaultAnnotation, FaultType};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One generated case, as listed in the manifest. Paths are relative to
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub file: PathBuf,
    pub meta_file: PathBuf,
    pub fault_type: FaultType,
    pub resistance_ohm: f64,
    pub distance_km: f64,
    pub fault_start_sample: usize,
    pub fault_end_sample: usize,
    pub seed: u64,
}

impl ManifestCase {
    pub fn annotation(&self) -> FaultAnnotation {
        FaultAnnotation {
            fault_type: self.fault_type,
            fault_start_sample: self.fault_start_sample,
            fault_end_sample: self.fault_end_sample,
            resistance_ohm: self.resistance_ohm,
            distance_km: self.distance_km,
            seed: self.seed,
        }
    }
}

/// Index of a generated dataset and the only source of ground truth for
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: DatasetConfig,
    pub cases: Vec<ManifestCase>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn case(&self, case_id: &str) -> Option<&ManifestCase> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Create `path` and hand a buffered writer to `body`, mapping IO errors to
/// the path.
pub(crate) fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// One JSON object per line.
pub fn write_events(path: &Path, events: &[FaultEvent]) -> Result<()> {
    write_with(path, |out| {
        for e in events {
            serde_json::to_writer(&mut *out, e)?;
            writeln!(out)?;
        }
        Ok(())
    })
}

pub fn read_events(path: &Path) -> Result<Vec<FaultEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            reason: e.to_string(),
        })?;
        events.push(e);
    }
    Ok(events)
}

pub fn write_pvalues(path: &Path, series: &PValueSeries) -> Result<()> {
    write_with(path, |out| {
        writeln!(out, "segment_index,p_value")?;
        for (i, p) in series.iter() {
            writeln!(out, "{i},{p}")?;
        }
        Ok(())
    })
}

pub fn read_pvalues(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    reader
        .deserialize::<(usize, f64)>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| csv_error(path, i + 1, e)))
        .collect()
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            reason: format!("{other:?}"),
        },
    }
}

/// `event_id,y1,y2` (more columns for higher output dimensions).
pub fn write_embedding(path: &Path, ids: &[usize], coords: &[Vec<f64>]) -> Result<()> {
    let dim = coords.first().map_or(2, Vec::len);
    write_with(path, |out| {
        let cols: Vec<String> = (1..=dim).map(|k| format!("y{k}")).collect();
        writeln!(out, "event_id,{}", cols.join(","))?;
        for (id, y) in ids.iter().zip(coords) {
            let vals: Vec<String> = y.iter().map(f64::to_string).collect();
            writeln!(out, "{id},{}", vals.join(","))?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub event_id: usize,
    pub cluster_label: usize,
}

pub fn write_clusters(path: &Path, rows: &[ClusterAssignment]) -> Result<()> {
    write_with(path, |out| {
        writeln!(out, "event_id,cluster_label")?;
        for r in rows {
            writeln!(out, "{},{}", r.event_id, r.cluster_label)?;
        }
        Ok(())
    })
}

pub fn read_clusters(path: &Path) -> Result<Vec<ClusterAssignment>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| csv_error(path, i + 1, e)))
        .collect()
}
