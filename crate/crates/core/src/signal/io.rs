use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{first_nonuniform, FaultAnnotation, SignalRecord, SignalTrace};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["t", "va", "vb", "vc", "ia", "ib", "ic"];

/// Sidecar annotation path: `case_0001.csv` becomes `case_0001.meta.json`.
pub fn meta_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Write records as CSV with the `t,va,vb,vc,ia,ib,ic` header. Values use
/// shortest round-trip formatting, so reading back is lossless.
pub fn write_csv(path: &Path, trace: &SignalTrace) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        for r in &trace.records {
            writeln!(out, "{},{},{},{},{},{},{}", r.t, r.va, r.vb, r.vc, r.ia, r.ib, r.ic)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Read a CSV trace; the sample period is taken from the first two
/// timestamps. Errors name the offending 1-based data row. A `.meta.json`
/// sidecar next to the file is attached when present.
pub fn read_csv(path: &Path) -> Result<SignalTrace> {
    let parse_err = |row: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;

    let header = reader.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != CSV_HEADER {
        return Err(parse_err(
            0,
            format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                names.join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| parse_err(row_no, e.to_string()))?;
        let mut values = [0.0; 7];
        for (j, field) in row.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row_no, format!("column `{}`: cannot parse `{field}`", CSV_HEADER[j])))?;
            if !v.is_finite() {
                return Err(parse_err(row_no, format!("column `{}` is not finite", CSV_HEADER[j])));
            }
            values[j] = v;
        }
        if values[0] < 0.0 {
            return Err(parse_err(row_no, "negative timestamp".into()));
        }
        records.push(SignalRecord::new(
            values[0],
            [values[1], values[2], values[3], values[4], values[5], values[6]],
        ));
    }

    if records.is_empty() {
        return Err(Error::EmptyInput("trace file has no samples"));
    }
    let dt = if records.len() > 1 {
        records[1].t - records[0].t
    } else {
        super::DEFAULT_DT
    };
    if !(dt > 0.0) {
        return Err(parse_err(2, "timestamps must increase".into()));
    }
    if let Some(row) = first_nonuniform(&records, dt) {
        return Err(parse_err(row + 1, format!("timestamp breaks the uniform period {dt}")));
    }

    let meta_path = meta_path_for(path);
    let meta = if meta_path.exists() {
        Some(read_meta(&meta_path)?)
    } else {
        None
    };
    SignalTrace::new(dt, records, meta)
}

pub fn write_meta(path: &Path, meta: &FaultAnnotation) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_meta(path: &Path) -> Result<FaultAnnotation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        std::fs::write(&p, "t,va,vb,vc,ia,ib,ic\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn bad_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,va,vb,vc,ia,ib,ic\n0,1,2,3,4,5,6\n0.1,1,2,x,4,5,6\n").unwrap();
        match read_csv(&p) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("hdr.csv");
        std::fs::write(&p, "time,a,b,c,d,e,f\n0,1,2,3,4,5,6\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::Parse { row: 0, .. })));
    }

    #[test]
    fn nonuniform_timestamps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "t,va,vb,vc,ia,ib,ic\n0,0,0,0,0,0,0\n1,0,0,0,0,0,0\n3,0,0,0,0,0,0\n").unwrap();
        assert!(matches!(read_csv(&p), Err(Error::Parse { row: 3, .. })));
    }
}
