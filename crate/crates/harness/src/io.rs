//! Dataset, hypothesis and trace files.
//!
//! Points are stored either as CSV (one point per row, no header) or in a
//! raw little-endian binary layout: the magic `LDME`, `u32` n, `u32` d, then
//! `n·d` `f64` values row by row. Readers detect the binary form by its magic.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ldme_core::{OutcomeTag, PointSet, TraceEvent};

use crate::error::{HarnessError, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"LDME";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    Csv,
    Binary,
}

impl PointFormat {
    /// `.bin` and `.ldme` select the binary layout; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("ldme") => PointFormat::Binary,
            _ => PointFormat::Csv,
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| HarnessError::io(path, e))?;
    Ok(buf)
}

/// Parses CSV rows of floats. Blank lines are skipped.
pub fn parse_csv_rows(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| HarnessError::format(path, format!("row {}: {e}", line + 1)))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| {
                    HarnessError::format(path, format!("row {}: `{field}`: {e}", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<PointSet> {
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(HarnessError::format(path, "missing LDME header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != n * d * 8 {
        return Err(HarnessError::format(
            path,
            format!(
                "expected {} bytes of data for {n}x{d}, found {}",
                n * d * 8,
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointSet::from_flat(data, d).map_err(|e| HarnessError::format(path, e.to_string()))
}

pub fn encode_binary(points: &PointSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + points.as_flat().len() * 8);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    out.extend_from_slice(&(points.dim() as u32).to_le_bytes());
    for x in points.as_flat() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    let bytes = read_all(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        return decode_binary(&bytes, path);
    }
    let rows = parse_csv_rows(&bytes, path)?;
    PointSet::from_rows(&rows).map_err(|e| HarnessError::format(path, e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

pub fn write_rows_csv<R: AsRef<[f64]>>(
    path: &Path,
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    let mut out = create(path)?;
    for row in rows {
        let line = row
            .as_ref()
            .iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}").map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_points(path: &Path, points: &PointSet, format: PointFormat) -> Result<()> {
    match format {
        PointFormat::Csv => write_rows_csv(path, points.rows()),
        PointFormat::Binary => {
            std::fs::write(path, encode_binary(points)).map_err(|e| HarnessError::io(path, e))
        }
    }
}

/// Hypotheses are plain CSV rows, one candidate mean per line.
pub fn read_hypotheses(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = parse_csv_rows(&read_all(path)?, path)?;
    if let Some(d) = rows.first().map(Vec::len) {
        if rows.iter().any(|r| r.len() != d) {
            return Err(HarnessError::format(path, "rows have different lengths"));
        }
    }
    Ok(rows)
}

pub const TRACE_HEADER: &str =
    "branch_id,depth,tag,lambda_star,wT_before,wT_after,wS_before,wS_after";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn trace_csv(events: &[TraceEvent]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for e in events {
        s.push_str(&format!(
            "{},{},{},{:?},{:?},{:?},{},{}\n",
            e.branch_id,
            e.depth,
            e.tag,
            e.lambda_star,
            e.wt_before,
            e.wt_after,
            opt(e.ws_before),
            opt(e.ws_after),
        ));
    }
    s
}

pub fn write_trace_csv(path: &Path, events: &[TraceEvent]) -> Result<()> {
    std::fs::write(path, trace_csv(events)).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_tag(s: &str) -> Option<OutcomeTag> {
    match s {
        "certified" => Some(OutcomeTag::Certified),
        "reweighted" => Some(OutcomeTag::Reweighted),
        "split" => Some(OutcomeTag::Split),
        _ => None,
    }
}
