use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of a snapshot CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    RowsAreChannels,
    #[default]
    RowsAreSamples,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows-are-channels" | "channels" => Ok(Layout::RowsAreChannels),
            "rows-are-samples" | "samples" => Ok(Layout::RowsAreSamples),
            _ => Err(Error::InvalidInput(format!("unknown layout '{s}'"))),
        }
    }
}

/// Snapshot stream: states `n x m` and inputs `l x m` (column `k` drives the
/// transition `k -> k + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
}

impl Dataset {
    pub fn new(states: DMatrix<f64>, inputs: Option<DMatrix<f64>>) -> Result<Self> {
        let m = states.ncols();
        let inputs = inputs.unwrap_or_else(|| DMatrix::zeros(0, m));
        if inputs.ncols() != m {
            return Err(Error::ShapeError(format!("{} input columns for {m} snapshots", inputs.ncols())));
        }
        if !states.iter().chain(inputs.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("dataset has non-finite entries".into()));
        }
        Ok(Dataset { states, inputs })
    }

    /// Treat the last `l` channels as inputs.
    pub fn split_inputs(self, l: usize) -> Result<Self> {
        let total = self.states.nrows();
        if self.l() != 0 || l >= total {
            return Err(Error::InvalidInput(format!("cannot take {l} input channels from {total}")));
        }
        let n = total - l;
        Dataset::new(self.states.rows(0, n).into_owned(), Some(self.states.rows(n, l).into_owned()))
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn l(&self) -> usize {
        self.inputs.nrows()
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn x(&self, k: usize) -> DVector<f64> {
        self.states.column(k).into_owned()
    }

    pub fn gamma(&self, k: usize) -> DVector<f64> {
        self.inputs.column(k).into_owned()
    }

    /// Pair matrices `(X, Y, Gamma)` for pairs `start .. start + count`.
    pub fn pairs(&self, start: usize, count: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (
            self.states.columns(start, count).into_owned(),
            self.states.columns(start + 1, count).into_owned(),
            self.inputs.columns(start, count).into_owned(),
        )
    }
}

fn parse_err(path: &Path, row: usize, col: Option<usize>, msg: impl Into<String>) -> Error {
    Error::ParseError {
        path: path.to_path_buf(),
        row,
        col,
        msg: msg.into(),
    }
}

/// Read a numeric CSV. A first row in which no cell parses as a number is
/// taken as a header. Row and column numbers in errors are 1-based.
pub fn ingest_csv(path: impl AsRef<Path>, layout: Layout) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| parse_err(path, line, None, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && rec.iter().all(|c| c.parse::<f64>().is_err()) {
            width = Some(rec.len());
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(parse_err(path, line, None, format!("expected {w} fields, found {}", rec.len())));
            }
        }
        width = Some(rec.len());
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, c)| match c.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(path, line, Some(j + 1), format!("'{c}' is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, None, "no numeric rows"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let table = DMatrix::from_row_iterator(r, c, rows.into_iter().flatten());
    let states = match layout {
        Layout::RowsAreChannels => table,
        Layout::RowsAreSamples => table.transpose(),
    };
    Dataset::new(states, None)
}

/// Write states followed by inputs as channels, with a header row
/// `x1..xn,u1..ul`.
pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset, layout: Layout) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let names: Vec<String> = (1..=data.n()).map(|i| format!("x{i}")).chain((1..=data.l()).map(|i| format!("u{i}"))).collect();
    let channel = |c: usize, k: usize| if c < data.n() { data.states[(c, k)] } else { data.inputs[(c - data.n(), k)] };
    let total = data.n() + data.l();
    match layout {
        Layout::RowsAreSamples => {
            writeln!(w, "{}", names.join(",")).map_err(io)?;
            for k in 0..data.len() {
                let row: Vec<String> = (0..total).map(|c| channel(c, k).to_string()).collect();
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
        Layout::RowsAreChannels => {
            for c in 0..total {
                let row: Vec<String> = (0..data.len()).map(|k| channel(c, k).to_string()).collect();
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
