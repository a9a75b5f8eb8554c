use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RunSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Index of the pair absorbed at this step.
    pub k: usize,
    pub rank: usize,
    pub rebuild: bool,
    pub nrmse: Option<f64>,
    pub frob_error: f64,
    pub singular_values: Vec<f64>,
    /// Reduced-operator eigenvalues, descending modulus.
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub spec: RunSpec,
    pub n: usize,
    pub l: usize,
    pub samples: usize,
    /// Generator seed when the data was synthesized.
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub meta: RunMeta,
    pub records: Vec<StepRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidInput(format!("unknown format '{s}'"))),
        }
    }
}

const FIXED: [&str; 5] = ["k", "rank", "rebuild", "nrmse", "frob_error"];

fn header(nsv: usize, neig: usize) -> Vec<String> {
    let mut h: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    h.extend((1..=nsv).map(|i| format!("sv{i}")));
    for i in 1..=neig {
        h.push(format!("eig{i}_re"));
        h.push(format!("eig{i}_im"));
    }
    h
}

fn csv_rows(records: &[StepRecord]) -> (Vec<String>, Vec<Vec<String>>) {
    let nsv = records.iter().map(|r| r.singular_values.len()).max().unwrap_or(0);
    let neig = records.iter().map(|r| r.eigenvalues.len()).max().unwrap_or(0);
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.k.to_string(),
                r.rank.to_string(),
                u8::from(r.rebuild).to_string(),
                r.nrmse.map(|v| v.to_string()).unwrap_or_default(),
                r.frob_error.to_string(),
            ];
            row.extend((0..nsv).map(|i| r.singular_values.get(i).map(|v| v.to_string()).unwrap_or_default()));
            for i in 0..neig {
                match r.eigenvalues.get(i) {
                    Some(z) => row.extend([z.re.to_string(), z.im.to_string()]),
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    (header(nsv, neig), rows)
}

pub fn emit_report(report: &StreamReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match format {
        ReportFormat::Json => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, report).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
            writeln!(w).and_then(|()| w.flush()).map_err(|e| Error::io(path, e))
        }
        ReportFormat::Csv => {
            let csv_err = |e: csv::Error| Error::io(path, e.into());
            let mut w = csv::Writer::from_writer(file);
            let (head, rows) = csv_rows(&report.records);
            w.write_record(&head).map_err(csv_err)?;
            for row in rows {
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<StreamReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Records from a CSV report (metadata is not part of the CSV form).
pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let perr = |row: usize, col: Option<usize>, msg: String| Error::ParseError {
        path: path.to_path_buf(),
        row,
        col,
        msg,
    };
    let head: Vec<String> = reader.headers().map_err(|e| perr(1, None, e.to_string()))?.iter().map(String::from).collect();
    if head.len() < FIXED.len() || head[..FIXED.len()] != FIXED {
        return Err(perr(1, None, "not a report header".into()));
    }
    let nsv = head.iter().filter(|h| h.starts_with("sv")).count();
    let neig = head.iter().filter(|h| h.ends_with("_re")).count();
    if head != header(nsv, neig) {
        return Err(perr(1, None, "unexpected column order".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| perr(row, None, e.to_string()))?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<Option<f64>> {
            let c = cell(j);
            if c.is_empty() {
                return Ok(None);
            }
            c.parse().map(Some).map_err(|_| perr(row, Some(j + 1), format!("'{c}' is not a number")))
        };
        let int = |j: usize| -> Result<usize> { cell(j).parse().map_err(|_| perr(row, Some(j + 1), format!("'{}' is not an integer", cell(j)))) };
        let singular_values = (0..nsv).map(|i| num(5 + i)).collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        let mut eigenvalues = Vec::new();
        for i in 0..neig {
            let j = 5 + nsv + 2 * i;
            if let (Some(re), Some(im)) = (num(j)?, num(j + 1)?) {
                eigenvalues.push(Complex64::new(re, im));
            }
        }
        out.push(StepRecord {
            k: int(0)?,
            rank: int(1)?,
            rebuild: int(2)? != 0,
            nrmse: num(3)?,
            frob_error: num(4)?.ok_or_else(|| perr(row, Some(5), "missing frob_error".into()))?,
            singular_values,
            eigenvalues,
        });
    }
    Ok(out)
}
