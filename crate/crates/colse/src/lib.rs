//! Std-side companion to `colse-core`: file formats, the training and
//! evaluation pipelines, synthetic data, and the command-line interface.
//!
//! The core crate holds the estimator math (tables, marginal CDFs, the
//! pair-copula chain, the error network, workload semantics); this crate
//! adds everything that touches an operating system — CSV ingestion,
//! workload files, the versioned model format, timing, and `main`.

pub mod cli;
pub mod eval;
pub mod ingest;
pub mod persist;
pub mod synth;
pub mod train;
pub mod workload_io;
