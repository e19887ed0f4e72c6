//! Workload file format and query-string parsing.
//!
//! One query per line: `attr op literal [AND attr op literal ...] ; count`,
//! the count being optional until the workload is labeled. The same grammar
//! (minus the count) serves `--query` strings on the command line, so
//! operators tolerate missing surrounding whitespace (`A1>=10`) and labels
//! may be bare (`tag = Cook`) or single-quoted (`tag = 'Cook'`). Blank
//! lines and `#` comments are skipped.
//!
//! Labels containing a single quote are not representable; the renderer
//! has no escape syntax (see the grammar doc).

use std::fmt;
use std::fs;
use std::path::Path;

use colse_core::table::{ColumnMeta, Literal, Predicate, PredicateOp, Table};
use colse_core::workload::{format_query, LabeledQuery, QuerySpec};

/// Lexical/syntactic failure, with a 0-based character position into the
/// offending line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "char {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Failure reading a workload file.
#[derive(Debug)]
pub enum WorkloadIoError {
    Io(std::io::Error),
    /// 1-based line number plus the positioned parse error.
    Parse { line: usize, err: ParseError },
    /// Predicate names a column absent from the table.
    UnknownAttribute { line: usize, name: String },
    /// A caller demanded labels and this entry (1-based, comments and
    /// blanks excluded) has no count field.
    MissingCount { entry: usize },
}

impl fmt::Display for WorkloadIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadIoError::Io(e) => write!(f, "cannot read workload: {e}"),
            WorkloadIoError::Parse { line, err } => write!(f, "line {line}: {err}"),
            WorkloadIoError::UnknownAttribute { line, name } => {
                write!(f, "line {line}: unknown attribute '{name}'")
            }
            WorkloadIoError::MissingCount { entry } => {
                write!(f, "workload entry {entry}: missing true-count field (workload not labeled)")
            }
        }
    }
}

impl std::error::Error for WorkloadIoError {}

/// A parsed line before attribute names are resolved to column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLine {
    pub predicates: Vec<(String, PredicateOp, Literal)>,
    pub count: Option<u64>,
}

/// Parse one line of the grammar. Does not touch any table.
pub fn parse_line(line: &str) -> Result<ParsedLine, ParseError> {
    Parser { s: line.as_bytes(), pos: 0 }.line()
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn line(&mut self) -> Result<ParsedLine, ParseError> {
        let mut predicates = Vec::new();
        self.skip_ws();
        loop {
            predicates.push(self.predicate()?);
            self.skip_ws();
            if self.eat_keyword("AND") {
                self.skip_ws();
                continue;
            }
            break;
        }
        let count = if self.eat(b';') {
            self.skip_ws();
            Some(self.count()?)
        } else {
            None
        };
        self.skip_ws();
        if self.pos < self.s.len() {
            return Err(self.err("trailing input"));
        }
        Ok(ParsedLine { predicates, count })
    }

    fn predicate(&mut self) -> Result<(String, PredicateOp, Literal), ParseError> {
        let attr = self.ident()?;
        self.skip_ws();
        let op = self.op()?;
        self.skip_ws();
        let literal = self.literal()?;
        Ok((attr, op, literal))
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'.')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected attribute name"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn op(&mut self) -> Result<PredicateOp, ParseError> {
        if self.eat_str(b"<=") {
            Ok(PredicateOp::Le)
        } else if self.eat_str(b">=") {
            Ok(PredicateOp::Ge)
        } else if self.eat(b'=') {
            Ok(PredicateOp::Eq)
        } else if self.peek() == Some(b'<') || self.peek() == Some(b'>') {
            Err(self.err("strict < / > unsupported; use <= or >="))
        } else {
            Err(self.err("expected operator =, <=, or >="))
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if self.eat(b'\'') {
            let start = self.pos;
            while self.peek().map(|c| c != b'\'').unwrap_or(false) {
                self.pos += 1;
            }
            if self.peek() != Some(b'\'') {
                return Err(ParseError { pos: start - 1, msg: "unterminated quote".into() });
            }
            let label = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
            self.pos += 1;
            return Ok(Literal::Label(label));
        }
        let start = self.pos;
        while self
            .peek()
            .map(|c| !c.is_ascii_whitespace() && c != b';')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected literal"));
        }
        let raw = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Literal::Number(v)),
            _ => Ok(Literal::Label(raw)),
        }
    }

    fn count(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a non-negative integer count"));
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError { pos: start, msg: "count out of range".into() })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, pat: &[u8]) -> bool {
        if self.s[self.pos..].starts_with(pat) {
            self.pos += pat.len();
            true
        } else {
            false
        }
    }

    /// `AND` as a standalone word, any case.
    fn eat_keyword(&mut self, kw: &str) -> bool {
        let end = self.pos + kw.len();
        if end > self.s.len() {
            return false;
        }
        let slice = &self.s[self.pos..end];
        if !slice.eq_ignore_ascii_case(kw.as_bytes()) {
            return false;
        }
        // must not run into an identifier ("ANDY" is a name, not a keyword)
        if self.s.get(end).map(|c| c.is_ascii_alphanumeric() || *c == b'_').unwrap_or(false) {
            return false;
        }
        self.pos = end;
        true
    }

    fn skip_ws(&mut self) {
        while self.peek().map(|c| c.is_ascii_whitespace()).unwrap_or(false) {
            self.pos += 1;
        }
    }

    fn err(&self, msg: &str) -> ParseError {
        ParseError { pos: self.pos, msg: msg.into() }
    }
}

/// Resolve parsed attribute names against a schema (a table's or a
/// model's; estimation has no table at hand).
pub fn resolve(
    columns: &[ColumnMeta],
    parsed: &ParsedLine,
    line: usize,
) -> Result<QuerySpec, WorkloadIoError> {
    let mut predicates = Vec::with_capacity(parsed.predicates.len());
    for (name, op, literal) in &parsed.predicates {
        let column = columns
            .iter()
            .position(|c| &c.name == name)
            .ok_or_else(|| WorkloadIoError::UnknownAttribute { line, name: name.clone() })?;
        predicates.push(Predicate { column, op: *op, literal: literal.clone() });
    }
    Ok(QuerySpec { predicates })
}

/// Read a workload file; count fields optional per line.
pub fn read_workload(
    path: &Path,
    columns: &[ColumnMeta],
) -> Result<Vec<(QuerySpec, Option<u64>)>, WorkloadIoError> {
    let text = fs::read_to_string(path).map_err(WorkloadIoError::Io)?;
    read_workload_str(&text, columns)
}

/// [`read_workload`] on an in-memory string.
pub fn read_workload_str(
    text: &str,
    columns: &[ColumnMeta],
) -> Result<Vec<(QuerySpec, Option<u64>)>, WorkloadIoError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = parse_line(raw).map_err(|err| WorkloadIoError::Parse { line, err })?;
        let spec = resolve(columns, &parsed, line)?;
        out.push((spec, parsed.count));
    }
    Ok(out)
}

/// Demand every line be labeled; converts to [`LabeledQuery`].
pub fn require_labels(
    entries: Vec<(QuerySpec, Option<u64>)>,
) -> Result<Vec<LabeledQuery>, WorkloadIoError> {
    entries
        .into_iter()
        .enumerate()
        .map(|(i, (query, count))| match count {
            Some(true_count) => Ok(LabeledQuery { query, true_count }),
            None => Err(WorkloadIoError::MissingCount { entry: i + 1 }),
        })
        .collect()
}

/// Render one line; `count` appends the label field.
pub fn render_line(table: &Table, q: &QuerySpec, count: Option<u64>) -> String {
    match count {
        Some(c) => format!("{} ; {}", format_query(table, q), c),
        None => format_query(table, q),
    }
}

/// Write queries (optionally labeled) to a file, one per line.
pub fn write_workload(
    path: &Path,
    table: &Table,
    entries: &[(QuerySpec, Option<u64>)],
) -> std::io::Result<()> {
    let mut text = String::new();
    for (q, count) in entries {
        text.push_str(&render_line(table, q, *count));
        text.push('\n');
    }
    fs::write(path, text)
}
