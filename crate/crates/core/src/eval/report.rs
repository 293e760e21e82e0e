use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{EvalError, EvalReport, QualityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Picks the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        ext.parse()
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(EvalError::UnknownFormat(s.to_string())),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, message: impl ToString) -> EvalError {
    EvalError::Malformed {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row).map_err(|e| malformed(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))?;
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| malformed(path, e))?;
            out.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path, format: ReportFormat) -> Result<Vec<T>, EvalError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format {
        ReportFormat::Csv => csv::Reader::from_reader(BufReader::new(file))
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| malformed(path, e)),
        ReportFormat::Json => serde_json::from_reader(BufReader::new(file)).map_err(|e| malformed(path, e)),
    }
}

pub fn write_reports(reports: &[EvalReport], path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    write_rows(reports, path, format)
}

pub fn read_reports(path: &Path, format: ReportFormat) -> Result<Vec<EvalReport>, EvalError> {
    read_rows(path, format)
}

pub fn write_quality_reports(reports: &[QualityReport], path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    write_rows(reports, path, format)
}

pub fn read_quality_reports(path: &Path, format: ReportFormat) -> Result<Vec<QualityReport>, EvalError> {
    read_rows(path, format)
}
