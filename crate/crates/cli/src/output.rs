//! Trace files: CSV with a fixed header, or JSON lines with the same fields.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use svilab_core::experiment::{TraceRow, TraceTable};

use crate::config::OutputFormat;
use crate::CliError;

pub const CSV_HEADER: [&str; 12] = [
    "run_id",
    "algorithm",
    "replication",
    "k",
    "rel_dist",
    "rel_dist_avg",
    "residual",
    "gap_lb",
    "grad_evals",
    "projections",
    "samples_drawn",
    "wall_ns",
];

/// One output record; `algorithm` holds the entry's name from the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub run_id: u64,
    pub algorithm: String,
    pub replication: u64,
    pub k: u64,
    pub rel_dist: Option<f64>,
    pub rel_dist_avg: Option<f64>,
    pub residual: Option<f64>,
    pub gap_lb: Option<f64>,
    pub grad_evals: u64,
    pub projections: u64,
    pub samples_drawn: u64,
    pub wall_ns: Option<u64>,
}

impl From<&TraceRow> for CsvRow {
    fn from(row: &TraceRow) -> Self {
        let r = &row.record;
        CsvRow {
            run_id: row.run_id,
            algorithm: row.label.clone(),
            replication: row.replication,
            k: r.k,
            rel_dist: r.rel_dist,
            rel_dist_avg: r.rel_dist_avg,
            residual: r.residual,
            gap_lb: r.gap_lb,
            grad_evals: r.counters.grad_evals,
            projections: r.counters.projections,
            samples_drawn: r.counters.samples_drawn,
            wall_ns: r.wall_ns,
        }
    }
}

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn opt_int(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl CsvRow {
    pub fn fields(&self) -> [String; 12] {
        [
            self.run_id.to_string(),
            self.algorithm.clone(),
            self.replication.to_string(),
            self.k.to_string(),
            opt_real(self.rel_dist),
            opt_real(self.rel_dist_avg),
            opt_real(self.residual),
            opt_real(self.gap_lb),
            self.grad_evals.to_string(),
            self.projections.to_string(),
            self.samples_drawn.to_string(),
            opt_int(self.wall_ns),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, rows: &[CsvRow]) -> std::io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn render(table: &TraceTable, format: OutputFormat) -> Vec<u8> {
    let rows: Vec<CsvRow> = table.rows.iter().map(CsvRow::from).collect();
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(&mut buf, &rows).expect("writing to memory"),
        OutputFormat::Jsonl => write_jsonl(&mut buf, &rows).expect("writing to memory"),
    }
    buf
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write leaves nothing behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Parses a CSV trace back into rows.
pub fn read_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let real = |s: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("bad real `{s}`"))
        }
    };
    let int = |s: &str| -> Result<u64, String> { s.parse().map_err(|_| format!("bad integer `{s}`")) };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| e.to_string())?;
        rows.push(CsvRow {
            run_id: int(&r[0])?,
            algorithm: r[1].to_string(),
            replication: int(&r[2])?,
            k: int(&r[3])?,
            rel_dist: real(&r[4])?,
            rel_dist_avg: real(&r[5])?,
            residual: real(&r[6])?,
            gap_lb: real(&r[7])?,
            grad_evals: int(&r[8])?,
            projections: int(&r[9])?,
            samples_drawn: int(&r[10])?,
            wall_ns: if r[11].is_empty() { None } else { Some(int(&r[11])?) },
        });
    }
    Ok(rows)
}
