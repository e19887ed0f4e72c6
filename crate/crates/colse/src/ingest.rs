//! CSV ingestion: parse a header-row CSV into a [`Table`], inferring each
//! column's kind (or honoring a caller-supplied hint) and label-encoding
//! categoricals.
//!
//! Inference rule: a column whose every value parses as a number is
//! `Continuous` when it has more than [`DISCRETE_DISTINCT_MAX`] distinct
//! values, `DiscreteNumeric` otherwise; anything else is `Categorical`.
//! NULLs (empty fields) are rejected — this loader has no missing-value
//! semantics and silently guessing one would corrupt ground-truth labels.

use std::fmt;
use std::fs::File;
use std::io::Read as _;
use std::path::Path;

use colse_core::table::{
    build_numeric_column, build_string_column, BuildError, ColumnKind, Table,
    DISCRETE_DISTINCT_MAX,
};

/// Why a CSV refused to load.
#[derive(Debug)]
pub enum IngestError {
    Io(std::io::Error),
    /// Malformed CSV (quoting, encoding) as reported by the reader.
    Csv(csv::Error),
    /// No header row / zero columns.
    EmptyFile,
    /// No data rows under the header.
    NoRows,
    /// A row with a different field count than the header. 1-based data
    /// row index (header excluded).
    RaggedRow { row: usize, expected: usize, got: usize },
    /// An empty field; NULLs are unsupported. 1-based data row index.
    NullField { row: usize, column: String },
    /// A kind hint conflicted with the data (e.g. `Continuous` on text).
    HintMismatch { column: String, detail: String },
    /// Column construction failed downstream.
    Build(BuildError),
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::Io(e) => write!(f, "cannot read data file: {e}"),
            IngestError::Csv(e) => write!(f, "malformed csv: {e}"),
            IngestError::EmptyFile => write!(f, "csv has no header row"),
            IngestError::NoRows => write!(f, "csv has a header but no data rows"),
            IngestError::RaggedRow { row, expected, got } => {
                write!(f, "row {row}: expected {expected} fields, found {got}")
            }
            IngestError::NullField { row, column } => {
                write!(f, "row {row}, column '{column}': empty field (NULLs unsupported)")
            }
            IngestError::HintMismatch { column, detail } => {
                write!(f, "column '{column}': kind hint conflicts with data: {detail}")
            }
            IngestError::Build(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IngestError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            IngestError::Io(e) => Some(e),
            IngestError::Csv(e) => Some(e),
            IngestError::Build(e) => Some(e),
            _ => None,
        }
    }
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e)
    }
}

impl From<BuildError> for IngestError {
    fn from(e: BuildError) -> Self {
        IngestError::Build(e)
    }
}

/// Load a CSV file with a header row. `hints` maps column name to a forced
/// kind; unhinted columns are inferred. `delimiter` defaults to `,`.
pub fn load_csv(
    path: &Path,
    hints: &[(String, ColumnKind)],
    delimiter: u8,
) -> Result<Table, IngestError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut fh| fh.read_to_string(&mut text))
        .map_err(IngestError::Io)?;
    load_csv_str(&text, hints, delimiter)
}

/// Same as [`load_csv`] on an in-memory string (test seam; the CLI reads
/// files).
pub fn load_csv_str(
    text: &str,
    hints: &[(String, ColumnKind)],
    delimiter: u8,
) -> Result<Table, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true) // field-count mismatches reported by us, with row numbers
        .from_reader(text.as_bytes());

    let header: Vec<String> = {
        let h = reader.headers()?;
        if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
            return Err(IngestError::EmptyFile);
        }
        h.iter().map(str::to_owned).collect()
    };
    let ncols = header.len();

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); ncols];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != ncols {
            return Err(IngestError::RaggedRow { row, expected: ncols, got: record.len() });
        }
        for (c, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(IngestError::NullField { row, column: header[c].clone() });
            }
            cells[c].push(field.to_owned());
        }
    }
    if cells[0].is_empty() {
        return Err(IngestError::NoRows);
    }

    let mut columns = Vec::with_capacity(ncols);
    let mut numeric = Vec::with_capacity(ncols);
    for (c, name) in header.iter().enumerate() {
        let hint = hints.iter().find(|(n, _)| n == name).map(|&(_, k)| k);
        let (meta, values) = build_column(name, &cells[c], hint)?;
        columns.push(meta);
        numeric.push(values);
    }
    Ok(Table::from_parts(columns, numeric)?)
}

/// Classify and encode one column of raw text fields.
fn build_column(
    name: &str,
    fields: &[String],
    hint: Option<ColumnKind>,
) -> Result<(colse_core::table::ColumnMeta, Vec<f64>), IngestError> {
    let parsed: Option<Vec<f64>> = fields
        .iter()
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();

    match hint {
        Some(ColumnKind::Categorical) => Ok(build_string_column(name, fields)?),
        Some(kind) => {
            let values = parsed.ok_or_else(|| IngestError::HintMismatch {
                column: name.to_owned(),
                detail: "non-numeric field in a column hinted numeric".to_owned(),
            })?;
            if kind == ColumnKind::DiscreteNumeric && values.iter().any(|v| v.fract() != 0.0) {
                return Err(IngestError::HintMismatch {
                    column: name.to_owned(),
                    detail: "fractional value in a column hinted discrete".to_owned(),
                });
            }
            Ok(build_numeric_column(name, values, Some(kind))?)
        }
        None => match parsed {
            Some(values) => {
                let kind = infer_numeric_kind(&values);
                Ok(build_numeric_column(name, values, Some(kind))?)
            }
            None => Ok(build_string_column(name, fields)?),
        },
    }
}

/// Distinct-count inference for numeric columns. Fractional values force
/// `Continuous` regardless of cardinality: they cannot be integer codes.
fn infer_numeric_kind(values: &[f64]) -> ColumnKind {
    if values.iter().any(|v| v.fract() != 0.0) {
        return ColumnKind::Continuous;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() > DISCRETE_DISTINCT_MAX {
        ColumnKind::Continuous
    } else {
        ColumnKind::DiscreteNumeric
    }
}
