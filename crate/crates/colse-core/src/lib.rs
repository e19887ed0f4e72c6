//! Core estimator algorithms: column metadata and predicate encoding,
//! monotone spline marginals with dequantization, Gumbel pair copulas
//! fitted by Kendall's tau, the D-vine recursive range-probability
//! estimator, the residual-correction network, and workload tooling.
//!
//! Everything here is pure computation over in-memory arrays; file
//! formats, CSV ingestion and the CLI live in the companion `colse`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod copula;
pub mod ecn;
pub mod jpe;
pub mod marginal;
pub mod metrics;
pub mod table;
pub mod workload;

/// Equality predicates on integer-coded columns cover `[c, c + 1 - CAT_EPS]`.
pub const CAT_EPS: f64 = 1e-9;

/// Denominators below this are treated as zero and trigger the
/// independence fallback in conditional CDFs.
pub const EPS_DEN: f64 = 1e-12;
