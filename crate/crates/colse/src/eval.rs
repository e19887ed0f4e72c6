//! Experiment harness: q-error reports for every estimator variant,
//! latency measurement, and the data-update experiment driver.
//!
//! Latency is wall clock around the estimate call only — projection of
//! predicates to bounds happens once per query beforehand, and each query
//! is timed over several repetitions with the median kept, so one
//! scheduler hiccup cannot smear a query's number. Evaluation runs
//! single-threaded by default for stable timing; the parallel mode is for
//! q-error-only runs and reports no latency.

use std::fmt::Write as _;
use std::time::Instant;

use colse_core::jpe::{project_query, QueryBounds};
use colse_core::metrics::{percentiles, qerror, Percentiles, QERROR_OFFSET};
use colse_core::table::{schema_fingerprint, ColumnKind, EncodeError, Table};
use colse_core::workload::LabeledQuery;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::persist::ModelBundle;
use crate::synth::DiscreteQuantile;
use crate::train::{self, map_indexed, PipelineError};

/// q-error summaries for the three estimator variants plus timing, and
/// optionally the raw per-query records.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub n_queries: usize,
    pub jpe: Percentiles,
    pub ecn: Percentiles,
    pub avi: Percentiles,
    /// `None` in parallel (q-error-only) mode.
    pub latency_ms_mean: Option<f64>,
    pub latency_ms_median: Option<f64>,
    /// Filled in by the caller when known; passed through to reports.
    pub train_time_s: Option<f64>,
    pub model_bytes: Option<u64>,
    pub per_query: Option<Vec<PerQueryRecord>>,
}

/// One row of the optional per-query dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerQueryRecord {
    pub query_id: usize,
    pub true_count: u64,
    pub jpe_rows: f64,
    pub ecn_rows: f64,
    pub avi_rows: f64,
    /// `None` when latency was not measured (parallel mode).
    pub latency_us: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Estimate-call repetitions per query; the median is kept. Ignored
    /// in parallel mode.
    pub repetitions: usize,
    /// Keep per-query records in the report.
    pub per_query: bool,
    /// Spread q-error computation over threads and skip timing.
    pub parallel_threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { repetitions: 3, per_query: false, parallel_threads: 1 }
    }
}

#[derive(Debug)]
pub enum EvalError {
    /// The model was trained on a different schema.
    SchemaMismatch { model: u64, table: u64 },
    /// A query failed to project for a reason other than an unknown
    /// label (those score as selectivity 0 instead).
    Encode(EncodeError),
    EmptyWorkload,
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::SchemaMismatch { model, table } => write!(
                f,
                "model fingerprint {model:016x} does not match table fingerprint {table:016x}"
            ),
            EvalError::Encode(e) => write!(f, "workload does not fit the schema: {e}"),
            EvalError::EmptyWorkload => write!(f, "cannot evaluate an empty workload"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Project every query up front. Unknown labels are not schema errors:
/// the query legitimately matches nothing and scores as selectivity 0
/// (`None` here).
fn project_all(
    bundle: &ModelBundle,
    workload: &[LabeledQuery],
) -> Result<Vec<Option<QueryBounds>>, EvalError> {
    workload
        .iter()
        .map(|lq| match project_query(&bundle.columns, &lq.query.predicates) {
            Ok(q) => Ok(Some(q)),
            Err(EncodeError::UnknownLabel { .. }) => Ok(None),
            Err(e) => Err(EvalError::Encode(e)),
        })
        .collect()
}

/// Run the workload through JPE, JPE+ECN, and AVI.
pub fn evaluate(
    bundle: &ModelBundle,
    table: &Table,
    workload: &[LabeledQuery],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let table_fp = schema_fingerprint(table.columns());
    if bundle.fingerprint() != table_fp {
        return Err(EvalError::SchemaMismatch { model: bundle.fingerprint(), table: table_fp });
    }
    if workload.is_empty() {
        return Err(EvalError::EmptyWorkload);
    }
    let bounds = project_all(bundle, workload)?;
    let rows = bundle.dvine.row_count() as f64;

    let records: Vec<PerQueryRecord> = if opts.parallel_threads > 1 {
        map_indexed(opts.parallel_threads, &bounds, |i, q| {
            let est = match q {
                Some(q) => bundle.estimate(q),
                None => crate::persist::EstimateSet { jpe: 0.0, corrected: 0.0, avi: 0.0 },
            };
            PerQueryRecord {
                query_id: i,
                true_count: workload[i].true_count,
                jpe_rows: est.jpe * rows,
                ecn_rows: est.corrected * rows,
                avi_rows: est.avi * rows,
                latency_us: None,
            }
        })
    } else {
        let reps = opts.repetitions.max(1);
        bounds
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut est = crate::persist::EstimateSet { jpe: 0.0, corrected: 0.0, avi: 0.0 };
                let mut times = Vec::with_capacity(reps);
                for _ in 0..reps {
                    let t0 = Instant::now();
                    if let Some(q) = q {
                        est = bundle.estimate(q);
                    }
                    times.push(t0.elapsed().as_secs_f64() * 1e6);
                }
                times.sort_unstable_by(f64::total_cmp);
                PerQueryRecord {
                    query_id: i,
                    true_count: workload[i].true_count,
                    jpe_rows: est.jpe * rows,
                    ecn_rows: est.corrected * rows,
                    avi_rows: est.avi * rows,
                    latency_us: Some(times[times.len() / 2]),
                }
            })
            .collect()
    };

    let q_of = |f: fn(&PerQueryRecord) -> f64| -> Percentiles {
        let qs: Vec<f64> = records
            .iter()
            .map(|r| qerror(f(r), r.true_count as f64, QERROR_OFFSET))
            .collect();
        percentiles(&qs)
    };
    let jpe = q_of(|r| r.jpe_rows);
    let ecn = q_of(|r| r.ecn_rows);
    let avi = q_of(|r| r.avi_rows);

    let (mean, median) = if opts.parallel_threads > 1 {
        (None, None)
    } else {
        let mut lats: Vec<f64> = records.iter().filter_map(|r| r.latency_us).collect();
        lats.sort_unstable_by(f64::total_cmp);
        let mean = lats.iter().sum::<f64>() / lats.len() as f64;
        (Some(mean / 1e3), Some(lats[lats.len() / 2] / 1e3))
    };

    Ok(EvalReport {
        n_queries: workload.len(),
        jpe,
        ecn,
        avi,
        latency_ms_mean: mean,
        latency_ms_median: median,
        train_time_s: None,
        model_bytes: None,
        per_query: opts.per_query.then_some(records),
    })
}

// ---- report rendering ------------------------------------------------------

fn metric_rows(r: &EvalReport) -> Vec<(String, String)> {
    let mut rows = vec![("n_queries".to_string(), r.n_queries.to_string())];
    for (tag, p) in [("jpe", &r.jpe), ("ecn", &r.ecn), ("avi", &r.avi)] {
        for (q, v) in [
            ("q50", p.p50),
            ("q75", p.p75),
            ("q90", p.p90),
            ("q95", p.p95),
            ("q99", p.p99),
            ("qmax", p.max),
        ] {
            rows.push((format!("{tag}_{q}"), format!("{v:.6}")));
        }
    }
    if let Some(v) = r.latency_ms_mean {
        rows.push(("latency_ms_mean".to_string(), format!("{v:.6}")));
    }
    if let Some(v) = r.latency_ms_median {
        rows.push(("latency_ms_median".to_string(), format!("{v:.6}")));
    }
    if let Some(v) = r.train_time_s {
        rows.push(("train_time_s".to_string(), format!("{v:.3}")));
    }
    if let Some(v) = r.model_bytes {
        rows.push(("model_bytes".to_string(), v.to_string()));
    }
    rows
}

/// Human-readable `key: value` block.
pub fn render_text(r: &EvalReport) -> String {
    let mut out = String::new();
    for (k, v) in metric_rows(r) {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

/// Machine-readable flat file: one `name<TAB>value` per line.
pub fn render_flat(r: &EvalReport) -> String {
    let mut out = String::new();
    for (k, v) in metric_rows(r) {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

/// Per-query dump: `query_id  true  jpe  ecn  avi  latency_us`,
/// tab-separated; latency `-` when unmeasured.
pub fn render_per_query(records: &[PerQueryRecord]) -> String {
    let mut out = String::from("query_id\ttrue\tjpe\tecn\tavi\tlatency_us\n");
    for r in records {
        let lat = match r.latency_us {
            Some(us) => format!("{us:.1}"),
            None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{}",
            r.query_id, r.true_count, r.jpe_rows, r.ecn_rows, r.avi_rows, lat
        );
    }
    out
}

// ---- update experiment -----------------------------------------------------

/// How appended rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendMode {
    /// Each column sampled independently and uniformly over its domain.
    Random,
    /// Copy of a random existing row, continuous columns jittered by 1%
    /// of their span (dependence structure preserved).
    Correlated,
    /// Zipf-like concentration: low codes on coded columns, low values
    /// on continuous ones (distribution shifts toward the domain floor).
    Skewed,
}

/// Which refit runs after the append.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Measure pure degradation.
    None,
    /// Refit marginals + θ; keep the stale ECN.
    Pu,
    /// Partial update plus ECN retrain on the relabeled workload.
    Fu,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub before: EvalReport,
    pub after: EvalReport,
    pub appended_rows: usize,
    /// Wall time of the refit itself; 0 for `UpdateMode::None`.
    pub update_seconds: f64,
}

/// Draw `count` schema-valid rows in encoded numeric space.
pub fn make_append_rows(
    table: &Table,
    count: usize,
    mode: AppendMode,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ncols = table.column_count();

    // per-column skew quantiles prepared once
    let skew_q: Vec<Option<DiscreteQuantile>> = (0..ncols)
        .map(|c| {
            let meta = table.meta(c);
            meta.kind.integer_coded().then(|| {
                let levels = (meta.domain_hi - meta.domain_lo).round().max(1.0) as usize;
                DiscreteQuantile::new(levels, 1.5)
            })
        })
        .collect();

    (0..count)
        .map(|_| {
            let anchor = rng.gen_range(0..table.row_count());
            (0..ncols)
                .map(|c| {
                    let meta = table.meta(c);
                    let (lo, hi) = (meta.domain_lo, meta.domain_hi);
                    match mode {
                        AppendMode::Random => match meta.kind {
                            ColumnKind::Continuous => rng.gen_range(lo..=hi),
                            _ => {
                                // codes live on [lo, hi): hi is the right edge
                                // of the top code's unit interval
                                let top = (hi - 1.0).max(lo);
                                rng.gen_range(lo as i64..=top as i64) as f64
                            }
                        },
                        AppendMode::Correlated => {
                            let base = table.column(c)[anchor];
                            match meta.kind {
                                ColumnKind::Continuous => {
                                    let sd = (hi - lo) * 0.01;
                                    let noise: f64 = rand::distributions::Uniform::new_inclusive(-sd, sd)
                                        .sample(&mut rng);
                                    (base + noise).clamp(lo, hi)
                                }
                                _ => base,
                            }
                        }
                        AppendMode::Skewed => match &skew_q[c] {
                            Some(q) => lo + q.level(rng.gen()) as f64,
                            None => {
                                // square of a uniform piles mass near lo
                                let u: f64 = rng.gen();
                                lo + (hi - lo) * u * u
                            }
                        },
                    }
                })
                .collect()
        })
        .collect()
}

/// Append → relabel → optionally refit → evaluate, returning the before
/// and after pictures. The table and bundle are left in their post-update
/// states so callers can chain experiments.
#[allow(clippy::too_many_arguments)]
pub fn run_update_experiment(
    table: &mut Table,
    bundle: &mut ModelBundle,
    workload: &[colse_core::workload::QuerySpec],
    append_count: usize,
    append_mode: AppendMode,
    update: UpdateMode,
    seed: u64,
    eval_opts: &EvalOptions,
) -> Result<UpdateOutcome, Box<dyn std::error::Error>> {
    let labeled_before = colse_core::workload::label(table, workload);
    let before = evaluate(bundle, table, &labeled_before, eval_opts)?;

    let rows = make_append_rows(table, append_count, append_mode, seed);
    table.append_rows(&rows)?;
    let labeled_after = colse_core::workload::label(table, workload);

    let t0 = Instant::now();
    match update {
        UpdateMode::None => {}
        UpdateMode::Pu => {
            train::partial_update(bundle, table).map_err(box_pipeline)?;
        }
        UpdateMode::Fu => {
            let cfg = colse_core::ecn::TrainConfig { seed, ..Default::default() };
            train::full_update(bundle, table, &labeled_after, &cfg).map_err(box_pipeline)?;
        }
    }
    let update_seconds = match update {
        UpdateMode::None => 0.0,
        _ => t0.elapsed().as_secs_f64(),
    };

    // under UpdateMode::None the bundle still carries the pre-append
    // fingerprint, which is identical: appends never change the schema
    let after = evaluate(bundle, table, &labeled_after, eval_opts)?;
    Ok(UpdateOutcome { before, after, appended_rows: append_count, update_seconds })
}

fn box_pipeline(e: PipelineError) -> Box<dyn std::error::Error> {
    Box::new(e)
}
