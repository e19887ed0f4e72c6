//! Column metadata, the in-memory table, and predicate-to-interval
//! encoding.
//!
//! Integer-coded columns (categorical labels and low-cardinality integer
//! columns) are modelled on the continuous line by assigning code `c` the
//! unit interval `[c, c + 1)`; every predicate on such a column is
//! rewritten to a closed interval that covers exactly the codes it
//! selects.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use crate::CAT_EPS;
// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// Columns with at most this many distinct numeric values are treated as
/// discrete.
pub const DISCRETE_DISTINCT_MAX: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Real-valued; predicates pass bounds through unchanged.
    Continuous,
    /// Integer-valued with few distinct values; value `v` owns `[v, v+1)`.
    DiscreteNumeric,
    /// String labels encoded to integer codes in lexicographic order.
    Categorical,
}

impl ColumnKind {
    /// True for columns whose values are integer codes owning unit intervals.
    pub fn integer_coded(self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub distinct_count: usize,
    /// Lower end of the encoded domain (minimum observed value or code).
    pub domain_lo: f64,
    /// Upper end of the encoded domain. For integer-coded columns this is
    /// `max_code + 1`, the right edge of the top code's interval.
    pub domain_hi: f64,
    /// Categorical only: code -> label, bytewise-lexicographic order.
    pub encoding: Vec<String>,
}

impl ColumnMeta {
    /// Look up the code of a categorical label.
    pub fn code_of(&self, label: &str) -> Option<usize> {
        self.encoding
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
    }
}

/// A raw cell value reconstructed from the encoded views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawValue<'a> {
    Number(f64),
    Label(&'a str),
}

/// A predicate literal as written by the user or the workload generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateOp {
    Eq,
    Le,
    Ge,
}

/// One conjunct of a range query: `column <op> literal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub column: usize,
    pub op: PredicateOp,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    EmptyColumn(String),
    NonFinite { column: String, row: usize },
    /// Column was hinted or classified integer-coded but holds a
    /// non-integral value.
    NonIntegral { column: String, row: usize },
    CodeOutOfRange { column: String, row: usize },
    LengthMismatch { column: String, expected: usize, got: usize },
    StringsForNumericKind(String),
}

impl core::fmt::Display for BuildError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BuildError::EmptyColumn(c) => write!(f, "column '{c}' has no rows"),
            BuildError::NonFinite { column, row } => {
                write!(f, "column '{column}' row {row}: non-finite value")
            }
            BuildError::NonIntegral { column, row } => {
                write!(f, "column '{column}' row {row}: non-integral value in integer-coded column")
            }
            BuildError::CodeOutOfRange { column, row } => {
                write!(f, "column '{column}' row {row}: categorical code out of range")
            }
            BuildError::LengthMismatch { column, expected, got } => {
                write!(f, "column '{column}' has {got} rows, expected {expected}")
            }
            BuildError::StringsForNumericKind(c) => {
                write!(f, "column '{c}' hinted numeric but contains unparseable values")
            }
        }
    }
}

impl core::error::Error for BuildError {}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodeError {
    /// The label does not appear in the column's encoding.
    UnknownLabel { column: String, label: String },
    /// Number literal on a categorical column or label on a numeric one.
    TypeMismatch { column: String },
    /// Equality is only defined on integer-coded columns.
    EqOnContinuous { column: String },
    UnknownColumn(String),
}

impl core::fmt::Display for EncodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EncodeError::UnknownLabel { column, label } => {
                write!(f, "column '{column}': unknown category '{label}'")
            }
            EncodeError::TypeMismatch { column } => {
                write!(f, "column '{column}': literal type does not match column kind")
            }
            EncodeError::EqOnContinuous { column } => {
                write!(f, "column '{column}': equality predicates require a discrete or categorical column")
            }
            EncodeError::UnknownColumn(c) => write!(f, "unknown column '{c}'"),
        }
    }
}

impl core::error::Error for EncodeError {}

/// An in-memory table: per-column metadata plus the encoded numeric view
/// (categorical labels replaced by codes; nothing dequantized yet).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<ColumnMeta>,
    numeric: Vec<Vec<f64>>,
    row_count: usize,
}

impl Table {
    /// Assemble a table from prepared columns, validating the invariants
    /// the estimator relies on.
    pub fn from_parts(columns: Vec<ColumnMeta>, numeric: Vec<Vec<f64>>) -> Result<Table, BuildError> {
        assert_eq!(columns.len(), numeric.len(), "metadata/data column count mismatch");
        let row_count = numeric.first().map_or(0, Vec::len);
        for (meta, values) in columns.iter().zip(&numeric) {
            if values.len() != row_count {
                return Err(BuildError::LengthMismatch {
                    column: meta.name.clone(),
                    expected: row_count,
                    got: values.len(),
                });
            }
            validate_column(meta, values, 0)?;
        }
        Ok(Table { columns, numeric, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn meta(&self, col: usize) -> &ColumnMeta {
        &self.columns[col]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.numeric[col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Reconstruct the original cell value from the encoded view.
    pub fn raw(&self, row: usize, col: usize) -> RawValue<'_> {
        let v = self.numeric[col][row];
        match self.columns[col].kind {
            ColumnKind::Categorical => RawValue::Label(&self.columns[col].encoding[v as usize]),
            _ => RawValue::Number(v),
        }
    }

    /// Append rows given in encoded numeric form (one inner slice per row,
    /// schema order). Domain bounds and distinct counts are refreshed.
    pub fn append_rows(&mut self, rows: &[Vec<f64>]) -> Result<(), BuildError> {
        for row in rows {
            assert_eq!(row.len(), self.columns.len(), "appended row arity mismatch");
        }
        for (c, meta) in self.columns.iter().enumerate() {
            for (k, row) in rows.iter().enumerate() {
                validate_cell(meta, row[c], self.row_count + k)?;
            }
        }
        for (c, values) in self.numeric.iter_mut().enumerate() {
            values.extend(rows.iter().map(|r| r[c]));
            let meta = &mut self.columns[c];
            meta.distinct_count = count_distinct(values);
            if meta.kind == ColumnKind::Continuous {
                meta.domain_lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                meta.domain_hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            } else {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                meta.domain_lo = lo;
                meta.domain_hi = hi + 1.0;
            }
        }
        self.row_count += rows.len();
        Ok(())
    }
}

fn validate_cell(meta: &ColumnMeta, v: f64, row: usize) -> Result<(), BuildError> {
    if !v.is_finite() {
        return Err(BuildError::NonFinite { column: meta.name.clone(), row });
    }
    match meta.kind {
        ColumnKind::Categorical => {
            if v != v.trunc() || v < 0.0 || v >= meta.encoding.len() as f64 {
                return Err(BuildError::CodeOutOfRange { column: meta.name.clone(), row });
            }
        }
        ColumnKind::DiscreteNumeric => {
            if v != v.trunc() {
                return Err(BuildError::NonIntegral { column: meta.name.clone(), row });
            }
        }
        ColumnKind::Continuous => {}
    }
    Ok(())
}

fn validate_column(meta: &ColumnMeta, values: &[f64], first_row: usize) -> Result<(), BuildError> {
    if values.is_empty() {
        return Err(BuildError::EmptyColumn(meta.name.clone()));
    }
    for (row, &v) in values.iter().enumerate() {
        validate_cell(meta, v, first_row + row)?;
    }
    Ok(())
}

fn count_distinct(values: &[f64]) -> usize {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut n = if sorted.is_empty() { 0 } else { 1 };
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            n += 1;
        }
    }
    n
}

/// Classify and package a numeric column: integer values with at most
/// [`DISCRETE_DISTINCT_MAX`] distinct levels become discrete, everything
/// else stays continuous. `force_kind` overrides the inference.
pub fn build_numeric_column(
    name: &str,
    values: Vec<f64>,
    force_kind: Option<ColumnKind>,
) -> Result<(ColumnMeta, Vec<f64>), BuildError> {
    if values.is_empty() {
        return Err(BuildError::EmptyColumn(name.to_string()));
    }
    for (row, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(BuildError::NonFinite { column: name.to_string(), row });
        }
    }
    let distinct = count_distinct(&values);
    let all_integral = values.iter().all(|&v| v == v.trunc());
    let kind = match force_kind {
        Some(k) => k,
        None => {
            if distinct <= DISCRETE_DISTINCT_MAX && all_integral {
                ColumnKind::DiscreteNumeric
            } else {
                ColumnKind::Continuous
            }
        }
    };
    if kind == ColumnKind::DiscreteNumeric && !all_integral {
        let row = values
            .iter()
            .position(|&v| v != v.trunc())
            .unwrap_or(0);
        return Err(BuildError::NonIntegral { column: name.to_string(), row });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (domain_lo, domain_hi) = match kind {
        ColumnKind::Continuous => (lo, hi),
        _ => (lo, hi + 1.0),
    };
    let meta = ColumnMeta {
        name: name.to_string(),
        kind,
        distinct_count: distinct,
        domain_lo,
        domain_hi,
        encoding: Vec::new(),
    };
    Ok((meta, values))
}

/// Encode a string column: distinct labels sorted bytewise become codes
/// `0..K`, and the numeric view holds those codes.
pub fn build_string_column(name: &str, values: &[String]) -> Result<(ColumnMeta, Vec<f64>), BuildError> {
    if values.is_empty() {
        return Err(BuildError::EmptyColumn(name.to_string()));
    }
    let mut encoding: Vec<String> = values.to_vec();
    encoding.sort_unstable();
    encoding.dedup();
    let codes = values
        .iter()
        .map(|v| encoding.binary_search(v).expect("label present") as f64)
        .collect();
    let distinct = encoding.len();
    let meta = ColumnMeta {
        name: name.to_string(),
        kind: ColumnKind::Categorical,
        distinct_count: distinct,
        domain_lo: 0.0,
        domain_hi: distinct as f64,
        encoding,
    };
    Ok((meta, codes))
}

/// Rewrite one predicate into a closed interval on the encoded domain.
///
/// Integer-coded columns own unit intervals per code, so an upper bound
/// `b` extends to the right edge of code `floor(b)` (minus [`CAT_EPS`]),
/// a lower bound rounds up to the next full code, and equality on code
/// `c` covers `[c, c + 1 - CAT_EPS]`. Continuous bounds pass through;
/// the missing side fills with the column domain edge.
pub fn encode_predicate_value(
    column: &ColumnMeta,
    op: PredicateOp,
    literal: &Literal,
) -> Result<(f64, f64), EncodeError> {
    let value = match (column.kind, literal) {
        (ColumnKind::Categorical, Literal::Label(l)) => match column.code_of(l) {
            Some(c) => c as f64,
            None => {
                return Err(EncodeError::UnknownLabel {
                    column: column.name.clone(),
                    label: l.clone(),
                })
            }
        },
        (ColumnKind::Categorical, Literal::Number(_)) => {
            return Err(EncodeError::TypeMismatch { column: column.name.clone() })
        }
        (_, Literal::Label(_)) => {
            return Err(EncodeError::TypeMismatch { column: column.name.clone() })
        }
        (_, Literal::Number(v)) => *v,
    };
    let interval = match column.kind {
        ColumnKind::Continuous => match op {
            PredicateOp::Eq => {
                return Err(EncodeError::EqOnContinuous { column: column.name.clone() })
            }
            PredicateOp::Ge => (value, column.domain_hi),
            PredicateOp::Le => (column.domain_lo, value),
        },
        // Code c owns [c, c+1): "x <= b" keeps every code up to floor(b),
        // "x >= b" starts at the first code not below b.
        _ => match op {
            PredicateOp::Eq => (value, value + 1.0 - CAT_EPS),
            PredicateOp::Ge => (value.ceil(), column.domain_hi),
            PredicateOp::Le => {
                (column.domain_lo, value.floor() + 1.0 - CAT_EPS)
            }
        },
    };
    Ok(interval)
}

/// Stable hash of the schema (names, kinds, encodings) for bundle/data
/// compatibility checks. FNV-1a over a canonical byte walk.
pub fn schema_fingerprint(columns: &[ColumnMeta]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for c in columns {
        eat(c.name.as_bytes());
        eat(&[0xff, c.kind as u8]);
        eat(&(c.encoding.len() as u64).to_le_bytes());
        for label in &c.encoding {
            eat(label.as_bytes());
            eat(&[0xfe]);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn label_encoding_is_alphabetical() {
        let (meta, codes) = build_string_column("job", &labels(&["Cook", "Ann", "Cook"])).unwrap();
        assert_eq!(meta.encoding, labels(&["Ann", "Cook"]));
        assert_eq!(codes, vec![1.0, 0.0, 1.0]);
        assert_eq!(meta.distinct_count, 2);
        assert_eq!(meta.domain_hi, 2.0);
    }

    #[test]
    fn discrete_threshold_is_one_thousand() {
        let small: Vec<f64> = (0..1000).map(|i| (i % 1000) as f64).collect();
        let (meta, _) = build_numeric_column("a", small, None).unwrap();
        assert_eq!(meta.kind, ColumnKind::DiscreteNumeric);

        let big: Vec<f64> = (0..1001).map(|i| i as f64).collect();
        let (meta, _) = build_numeric_column("a", big, None).unwrap();
        assert_eq!(meta.kind, ColumnKind::Continuous);
    }

    #[test]
    fn non_integral_low_cardinality_stays_continuous() {
        let vals = vec![0.5, 1.5, 0.5, 2.5];
        let (meta, _) = build_numeric_column("a", vals, None).unwrap();
        assert_eq!(meta.kind, ColumnKind::Continuous);
    }

    #[test]
    fn constant_column_metadata() {
        let (meta, _) = build_numeric_column("a", vec![5.0, 5.0, 5.0], None).unwrap();
        assert_eq!(meta.kind, ColumnKind::DiscreteNumeric);
        assert_eq!(meta.distinct_count, 1);
        assert_eq!((meta.domain_lo, meta.domain_hi), (5.0, 6.0));
    }

    #[test]
    fn categorical_equality_interval() {
        let (meta, _) = build_string_column("job", &labels(&["Cook", "Ann"])).unwrap();
        let (lb, ub) =
            encode_predicate_value(&meta, PredicateOp::Eq, &Literal::Label("Ann".into())).unwrap();
        assert_eq!(lb, 0.0);
        assert_eq!(ub, 1.0 - 1e-9);
    }

    #[test]
    fn discrete_equality_interval() {
        let (meta, _) = build_numeric_column("a", vec![5.0, 7.0, 7.0], None).unwrap();
        let (lb, ub) =
            encode_predicate_value(&meta, PredicateOp::Eq, &Literal::Number(7.0)).unwrap();
        assert_eq!(lb, 7.0);
        assert_eq!(ub, 8.0 - 1e-9);
    }

    #[test]
    fn discrete_bounds_cover_whole_codes() {
        let (meta, _) = build_numeric_column("a", vec![1.0, 9.0], None).unwrap();
        // x <= 7 must keep all of code 7's interval [7, 8).
        let (lb, ub) =
            encode_predicate_value(&meta, PredicateOp::Le, &Literal::Number(7.0)).unwrap();
        assert_eq!((lb, ub), (1.0, 8.0 - 1e-9));
        // x >= 7.5 can only start at code 8.
        let (lb, _) =
            encode_predicate_value(&meta, PredicateOp::Ge, &Literal::Number(7.5)).unwrap();
        assert_eq!(lb, 8.0);
    }

    #[test]
    fn continuous_open_side_fills_with_domain() {
        let (meta, _) = build_numeric_column("a", vec![1.0, 2.5, 42.5], None).unwrap();
        let (lb, ub) =
            encode_predicate_value(&meta, PredicateOp::Ge, &Literal::Number(10.0)).unwrap();
        assert_eq!((lb, ub), (10.0, 42.5));
    }

    #[test]
    fn unknown_label_is_reported_by_name() {
        let (meta, _) = build_string_column("job", &labels(&["Cook"])).unwrap();
        let err = encode_predicate_value(&meta, PredicateOp::Eq, &Literal::Label("Chef".into()))
            .unwrap_err();
        assert!(matches!(err, EncodeError::UnknownLabel { ref label, .. } if label == "Chef"));
        assert!(alloc::format!("{err}").contains("Chef"));
    }

    #[test]
    fn equality_on_continuous_rejected() {
        let (meta, _) = build_numeric_column("a", vec![0.25, 1.0, 2.0], None).unwrap();
        let err =
            encode_predicate_value(&meta, PredicateOp::Eq, &Literal::Number(1.0)).unwrap_err();
        assert!(matches!(err, EncodeError::EqOnContinuous { .. }));
    }

    #[test]
    fn table_round_trips_raw_values() {
        let (m1, c1) = build_string_column("job", &labels(&["Cook", "Ann"])).unwrap();
        let (m2, c2) = build_numeric_column("age", vec![30.0, 41.5], None).unwrap();
        let t = Table::from_parts(vec![m1, m2], vec![c1, c2]).unwrap();
        assert_eq!(t.raw(0, 0), RawValue::Label("Cook"));
        assert_eq!(t.raw(1, 0), RawValue::Label("Ann"));
        assert_eq!(t.raw(1, 1), RawValue::Number(41.5));
    }

    #[test]
    fn append_refreshes_metadata() {
        let (m, c) = build_numeric_column("a", vec![1.0, 2.0], None).unwrap();
        let mut t = Table::from_parts(vec![m], vec![c]).unwrap();
        t.append_rows(&[vec![4.0]]).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.meta(0).distinct_count, 3);
        assert_eq!(t.meta(0).domain_hi, 5.0);
    }

    #[test]
    fn fingerprint_tracks_schema_not_data() {
        let (m1, c1) = build_numeric_column("a", vec![1.0, 2.0], None).unwrap();
        let (m2, c2) = build_numeric_column("a", vec![7.0, 2.0], None).unwrap();
        // same name/kind/encoding -> same fingerprint even with other data
        assert_eq!(schema_fingerprint(&[m1.clone()]), schema_fingerprint(&[m2]));
        let (m3, _) = build_string_column("a", &labels(&["x"])).unwrap();
        assert_ne!(schema_fingerprint(&[m1]), schema_fingerprint(&[m3]));
        drop((c1, c2));
    }
}
