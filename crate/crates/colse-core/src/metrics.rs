//! Accuracy metrics: q-error with a one-row offset and nearest-rank
//! percentile summaries.

use alloc::vec::Vec;

// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// Rows added to both sides of the q-error ratio so exact-zero counts
/// stay finite.
pub const QERROR_OFFSET: f64 = 1.0;

/// Multiplicative error between an estimate and the truth, both in rows:
/// `max((est+o)/(true+o), (true+o)/(est+o))`. Always >= 1.
pub fn qerror(est_rows: f64, true_rows: f64, offset: f64) -> f64 {
    debug_assert!(est_rows >= 0.0 && true_rows >= 0.0, "row counts cannot be negative");
    let a = est_rows + offset;
    let b = true_rows + offset;
    (a / b).max(b / a)
}

/// Nearest-rank percentile summary of a q-error (or latency) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

/// Summarize by nearest rank: the p-th percentile is the
/// `ceil(p * n)`-th smallest value.
pub fn percentiles(values: &[f64]) -> Percentiles {
    assert!(!values.is_empty(), "percentiles of an empty sample");
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let at = |p: f64| {
        let rank = (p * n as f64).ceil() as usize;
        sorted[rank.clamp(1, n) - 1]
    };
    Percentiles {
        p50: at(0.50),
        p75: at(0.75),
        p90: at(0.90),
        p95: at(0.95),
        p99: at(0.99),
        max: sorted[n - 1],
    }
}
