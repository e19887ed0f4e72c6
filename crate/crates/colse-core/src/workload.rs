//! Workload generation and exact ground-truth labeling.
//!
//! Queries are built in three steps — pick attributes, pick centers,
//! assign operators and widths — and labeled by a full conjunctive scan
//! of the raw encoded values. The scan is the ground-truth oracle every
//! estimator in this workspace is judged against, so it stays deliberately
//! simple: no indexes, no sampling, no shortcuts beyond early exit.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::table::{ColumnKind, Literal, Predicate, PredicateOp, Table};

// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// One conjunctive query. Range predicates appear as a `Ge`/`Le` pair on
/// the same attribute; projection later intersects them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub predicates: Vec<Predicate>,
}

/// A query with its exact match count from a full scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub query: QuerySpec,
    pub true_count: u64,
}

impl LabeledQuery {
    pub fn true_sel(&self, row_count: u64) -> f64 {
        self.true_count as f64 / row_count as f64
    }
}

/// Where query centers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterDist {
    /// Sample a data row and center on its value (queries land on mass).
    Data,
    /// Sample uniformly from the column domain.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub n_queries: usize,
    /// Fix every query to this many attributes; `None` draws uniformly
    /// from `1..=column_count`.
    pub fixed_dims: Option<usize>,
    pub center: CenterDist,
    /// Interval width as a fraction of the attribute domain, drawn
    /// uniformly from this range.
    pub width_range: (f64, f64),
    /// Probabilities of (two-sided range, one-sided bound, equality).
    /// Equality rolls on continuous attributes fall back to a range.
    pub op_mix: (f64, f64, f64),
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            n_queries: 1000,
            fixed_dims: None,
            center: CenterDist::Data,
            width_range: (0.01, 0.5),
            op_mix: (0.7, 0.2, 0.1),
            seed: 42,
        }
    }
}

/// Generate a workload. Deterministic for a fixed config.
pub fn generate(table: &Table, cfg: &WorkloadConfig) -> Vec<QuerySpec> {
    assert!(cfg.n_queries >= 1, "workload needs at least one query");
    let (p_range, p_one, p_eq) = cfg.op_mix;
    assert!(
        (p_range + p_one + p_eq - 1.0).abs() < 1e-9 && p_range >= 0.0 && p_one >= 0.0 && p_eq >= 0.0,
        "operator mix must be a probability distribution"
    );
    let n_cols = table.column_count();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_queries);
    for _ in 0..cfg.n_queries {
        let dims = match cfg.fixed_dims {
            Some(d) => d.clamp(1, n_cols),
            None => rng.gen_range(1..=n_cols),
        };
        let mut attrs: Vec<usize> = sample(&mut rng, n_cols, dims).into_vec();
        attrs.sort_unstable();
        // one anchor row per query: every predicate centers on the same
        // tuple, so a data-centered query always matches at least that row
        let anchor = rng.gen_range(0..table.row_count());
        let mut predicates = Vec::with_capacity(2 * dims);
        for attr in attrs {
            let meta = table.meta(attr);
            let center = match cfg.center {
                CenterDist::Data => table.column(attr)[anchor],
                CenterDist::Uniform => {
                    meta.domain_lo + rng.gen::<f64>() * (meta.domain_hi - meta.domain_lo)
                }
            };
            let roll = rng.gen::<f64>();
            let op = if roll < p_eq && meta.kind.integer_coded() {
                PredicateOp::Eq
            } else if roll < p_eq + p_one {
                if rng.gen::<bool>() {
                    PredicateOp::Ge
                } else {
                    PredicateOp::Le
                }
            } else {
                // two-sided range (also the fallback for eq on continuous)
                let span = meta.domain_hi - meta.domain_lo;
                let width =
                    span * (cfg.width_range.0 + rng.gen::<f64>() * (cfg.width_range.1 - cfg.width_range.0));
                predicates.push(predicate(meta, attr, PredicateOp::Ge, center - width / 2.0));
                predicates.push(predicate(meta, attr, PredicateOp::Le, center + width / 2.0));
                continue;
            };
            predicates.push(predicate(meta, attr, op, center));
        }
        out.push(QuerySpec { predicates });
    }
    out
}

/// Build one predicate, converting the numeric draw back to the
/// column's literal type (labels for categorical columns, integers for
/// discrete ones).
fn predicate(meta: &crate::table::ColumnMeta, attr: usize, op: PredicateOp, value: f64) -> Predicate {
    let literal = match meta.kind {
        ColumnKind::Categorical => {
            let top = meta.encoding.len() as f64 - 1.0;
            let code = value.round().clamp(0.0, top) as usize;
            Literal::Label(meta.encoding[code].clone())
        }
        ColumnKind::DiscreteNumeric => Literal::Number(value.round()),
        ColumnKind::Continuous => Literal::Number(value),
    };
    Predicate { column: attr, op, literal }
}

/// Replace `ceil(fraction * |base|)` queries (random positions) with
/// freshly generated ones. Deterministic for a fixed seed.
pub fn shift_workload(
    base: &[QuerySpec],
    table: &Table,
    cfg: &WorkloadConfig,
    fraction: f64,
    seed: u64,
) -> Vec<QuerySpec> {
    assert!((0.0..=1.0).contains(&fraction), "fraction must lie in [0,1]");
    let k = (fraction * base.len() as f64).ceil() as usize;
    let mut out = base.to_vec();
    if k == 0 {
        return out;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let positions = sample(&mut rng, base.len(), k.min(base.len()));
    let fresh = generate(table, &WorkloadConfig { n_queries: k, seed, ..cfg.clone() });
    for (pos, q) in positions.iter().zip(fresh) {
        out[pos] = q;
    }
    out
}

/// A predicate compiled against the encoded numeric view. Label
/// comparisons reduce to code comparisons because label encoding is
/// order-preserving; a label absent from the encoding compares through
/// its lexicographic insertion point.
#[derive(Debug, Clone, Copy)]
enum Test {
    Ge(f64),
    Le(f64),
    Eq(f64),
    Never,
}

fn compile(table: &Table, p: &Predicate) -> Test {
    let meta = table.meta(p.column);
    let value = match &p.literal {
        Literal::Number(v) => *v,
        Literal::Label(l) => match meta.encoding.binary_search_by(|probe| probe.as_str().cmp(l)) {
            Ok(code) => code as f64,
            Err(insertion) => {
                // unseen label: no row is equal; order predicates compare
                // against the position the label would occupy
                return match p.op {
                    PredicateOp::Eq => Test::Never,
                    PredicateOp::Ge => Test::Ge(insertion as f64),
                    PredicateOp::Le => Test::Le(insertion as f64 - 1.0),
                };
            }
        },
    };
    match p.op {
        PredicateOp::Eq => Test::Eq(value),
        PredicateOp::Ge => Test::Ge(value),
        PredicateOp::Le => Test::Le(value),
    }
}

/// Exact match count of one query via full scan with early exit.
pub fn count_matches(table: &Table, query: &QuerySpec) -> u64 {
    let tests: Vec<(usize, Test)> =
        query.predicates.iter().map(|p| (p.column, compile(table, p))).collect();
    let mut count = 0u64;
    'rows: for row in 0..table.row_count() {
        for &(attr, test) in &tests {
            let v = table.column(attr)[row];
            let pass = match test {
                Test::Ge(b) => v >= b,
                Test::Le(b) => v <= b,
                Test::Eq(b) => v == b,
                Test::Never => false,
            };
            if !pass {
                continue 'rows;
            }
        }
        count += 1;
    }
    count
}

/// Label every query with its exact selectivity ground truth.
pub fn label(table: &Table, queries: &[QuerySpec]) -> Vec<LabeledQuery> {
    queries
        .iter()
        .map(|q| LabeledQuery { query: q.clone(), true_count: count_matches(table, q) })
        .collect()
}

/// Render a query in the external one-line format (no count field).
pub fn format_query(table: &Table, q: &QuerySpec) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for (i, p) in q.predicates.iter().enumerate() {
        if i > 0 {
            s.push_str(" AND ");
        }
        let op = match p.op {
            PredicateOp::Eq => "=",
            PredicateOp::Le => "<=",
            PredicateOp::Ge => ">=",
        };
        match &p.literal {
            Literal::Number(v) => {
                let _ = write!(s, "{} {} {}", table.meta(p.column).name, op, v);
            }
            Literal::Label(l) => {
                let _ = write!(s, "{} {} '{}'", table.meta(p.column).name, op, l);
            }
        }
    }
    s
}
