//! Training pipeline: marginals → dequantized views → pairwise θ →
//! (optionally) query featurization and error-network training → bundle.
//!
//! Every stage is deterministic under the configured seed, including the
//! parallel paths: work is split by column / pair / query and reassembled
//! by index, and every stochastic step derives its own stream from the
//! seed, so `COLSE_THREADS` changes wall time but never a single output
//! bit.

use std::time::Instant;

use colse_core::copula::{kendall_tau, theta_from_tau, ThetaMatrix};
use colse_core::ecn::{
    featurize, residual, EcnModel, TrainConfig, TrainError, TrainReport, TrainSample,
};
use colse_core::jpe::{project_query, DVineModel};
use colse_core::marginal::{dequantize_column, fit_marginal, FitError, MarginalCdf};
use colse_core::table::Table;
use colse_core::workload::LabeledQuery;
use rayon::prelude::*;

use crate::persist::ModelBundle;

/// Per-column dequantization streams must differ; derived from the model
/// seed so reruns reproduce them.
const DEQUANT_SALT: u64 = 0x4445_5155;

/// How to build a model.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub bins: usize,
    pub seed: u64,
    /// `None` skips the error network (JPE-only bundle).
    pub ecn: Option<TrainConfig>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            bins: colse_core::marginal::DEFAULT_BINS,
            seed: 42,
            ecn: Some(TrainConfig::default()),
        }
    }
}

/// Wall time of one pipeline stage, for the training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTime {
    pub name: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainSummary {
    pub stages: Vec<StageTime>,
    pub ecn_report: Option<TrainReport>,
}

impl TrainSummary {
    fn push(&mut self, name: &'static str, t0: Instant) {
        self.stages.push(StageTime { name, seconds: t0.elapsed().as_secs_f64() });
    }

    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Pipeline failure, tagged with the stage that raised it.
#[derive(Debug)]
pub enum PipelineError {
    Marginal { column: String, err: FitError },
    /// ECN requested but the training workload is empty.
    EmptyWorkload,
    Ecn(TrainError),
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineError::Marginal { column, err } => {
                write!(f, "stage marginals, column '{column}': {err}")
            }
            PipelineError::EmptyWorkload => {
                write!(f, "stage ecn: training requires a labeled workload (or pass --no-ecn)")
            }
            PipelineError::Ecn(e) => write!(f, "stage ecn: {e}"),
        }
    }
}

impl std::error::Error for PipelineError {}

/// Threads granted to parallel stages. Absent or unparsable `COLSE_THREADS`
/// means sequential — the reproducible default the resource-budget numbers
/// are quoted under.
pub fn configured_threads() -> usize {
    std::env::var("COLSE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Map `f` over items, on a private pool when more than one thread is
/// granted. Output order always matches input order.
pub(crate) fn map_indexed<T: Sync, U: Send, F>(threads: usize, items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U + Sync,
{
    if threads > 1 && items.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction cannot fail with a positive count");
        pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
    } else {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Fit the joint-CDF side (marginals, dequantized views, θ matrix).
pub fn fit_jpe(
    table: &Table,
    bins: usize,
    seed: u64,
    threads: usize,
    summary: &mut TrainSummary,
) -> Result<DVineModel, PipelineError> {
    let t0 = Instant::now();
    let columns: Vec<&[f64]> = (0..table.column_count()).map(|c| table.column(c)).collect();
    let fitted: Vec<Result<MarginalCdf, PipelineError>> = map_indexed(threads, &columns, |c, vals| {
        fit_marginal(vals, bins, table.meta(c).kind.integer_coded()).map_err(|err| {
            PipelineError::Marginal { column: table.meta(c).name.clone(), err }
        })
    });
    let mut marginals = Vec::with_capacity(fitted.len());
    for m in fitted {
        marginals.push(m?);
    }
    summary.push("marginals", t0);

    let t0 = Instant::now();
    // continuous columns keep their raw values; coded columns get a
    // seeded continuous stand-in so rank statistics see no ties
    let views: Vec<Vec<f64>> = map_indexed(threads, &columns, |c, vals| {
        if table.meta(c).kind.integer_coded() {
            dequantize_column(vals, &marginals[c], seed ^ DEQUANT_SALT ^ (c as u64))
        } else {
            vals.to_vec()
        }
    });
    summary.push("dequantize", t0);

    let t0 = Instant::now();
    let n = views.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let thetas_flat: Vec<f64> = map_indexed(threads, &pairs, |_, &(i, j)| {
        theta_from_tau(kendall_tau(&views[i], &views[j]))
    });
    let mut thetas = ThetaMatrix::identity(n);
    for (&(i, j), &t) in pairs.iter().zip(&thetas_flat) {
        thetas.set(i, j, t);
    }
    summary.push("thetas", t0);

    Ok(DVineModel::new(marginals, thetas, table.row_count() as u64))
}

/// Turn labeled queries into ECN training rows: run the JPE and AVI on
/// each query and record features plus the log-space residual.
pub fn build_training_set(
    table: &Table,
    model: &DVineModel,
    workload: &[LabeledQuery],
    threads: usize,
) -> Vec<TrainSample> {
    let s_min = model.s_min();
    let rows = model.row_count();
    map_indexed(threads, workload, |_, lq| {
        // generated workloads always project cleanly onto their own schema
        let q = project_query(table.columns(), &lq.query.predicates)
            .expect("labeled query references its own table's schema");
        let jpe = model.estimate(&q);
        let avi = model.avi_estimate(&q);
        TrainSample {
            features: featurize(model, &q, jpe, avi),
            residual: residual(lq.true_sel(rows), jpe, s_min),
        }
    })
}

/// End-to-end training. `workload` may be empty only when `opts.ecn` is
/// `None`.
pub fn train_bundle(
    table: &Table,
    workload: &[LabeledQuery],
    opts: &TrainOptions,
) -> Result<(ModelBundle, TrainSummary), PipelineError> {
    let threads = configured_threads();
    let mut summary = TrainSummary::default();
    let dvine = fit_jpe(table, opts.bins, opts.seed, threads, &mut summary)?;

    let ecn = match &opts.ecn {
        None => None,
        Some(cfg) => {
            if workload.is_empty() {
                return Err(PipelineError::EmptyWorkload);
            }
            let t0 = Instant::now();
            let samples = build_training_set(table, &dvine, workload, threads);
            summary.push("featurize", t0);

            let t0 = Instant::now();
            // the network itself always trains on one thread: SGD order is
            // part of the deterministic contract
            let mut net = EcnModel::new(table.column_count(), cfg.seed);
            let report = net.train(&samples, &[], cfg).map_err(PipelineError::Ecn)?;
            summary.push("ecn", t0);
            summary.ecn_report = Some(report);
            Some(net)
        }
    };

    let bundle = ModelBundle {
        columns: table.columns().to_vec(),
        dvine,
        ecn,
        seed: opts.seed,
        bins: opts.bins as u32,
    };
    Ok((bundle, summary))
}

/// Partial update: refit marginals and θ on the current table, keep the
/// (now stale) ECN. Refreshes schema metadata and row count. Returns
/// stage times.
pub fn partial_update(bundle: &mut ModelBundle, table: &Table) -> Result<TrainSummary, PipelineError> {
    let threads = configured_threads();
    let mut summary = TrainSummary::default();
    let dvine = fit_jpe(table, bundle.bins as usize, bundle.seed, threads, &mut summary)?;
    bundle.dvine = dvine;
    bundle.columns = table.columns().to_vec();
    Ok(summary)
}

/// Full update: partial update plus an ECN retrain on the supplied
/// (relabeled) workload.
pub fn full_update(
    bundle: &mut ModelBundle,
    table: &Table,
    workload: &[LabeledQuery],
    cfg: &TrainConfig,
) -> Result<TrainSummary, PipelineError> {
    let threads = configured_threads();
    let mut summary = partial_update(bundle, table)?;
    if workload.is_empty() {
        return Err(PipelineError::EmptyWorkload);
    }
    let t0 = Instant::now();
    let samples = build_training_set(table, &bundle.dvine, workload, threads);
    summary.push("featurize", t0);

    let t0 = Instant::now();
    let mut net = EcnModel::new(table.column_count(), cfg.seed);
    let report = net.train(&samples, &[], cfg).map_err(PipelineError::Ecn)?;
    summary.push("ecn", t0);
    summary.ecn_report = Some(report);
    bundle.ecn = Some(net);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persist::to_bytes;
    use crate::synth::{generate_table, SynthConfig, SynthKind, TauSpec};
    use colse_core::workload::{generate, label, WorkloadConfig};

    fn small_table(seed: u64) -> Table {
        generate_table(&SynthConfig {
            rows: 3_000,
            columns: vec![
                ("a".into(), SynthKind::Uniform { lo: 0.0, hi: 10.0 }),
                ("b".into(), SynthKind::Normal { mean: 0.0, sd: 1.0 }),
                ("c".into(), SynthKind::Discrete { levels: 8, skew: 0.5 }),
            ],
            tau: TauSpec::Equi(0.4),
            seed,
        })
    }

    fn small_workload(table: &Table, n: usize, seed: u64) -> Vec<LabeledQuery> {
        let cfg = WorkloadConfig { n_queries: n, seed, ..WorkloadConfig::default() };
        label(table, &generate(table, &cfg))
    }

    #[test]
    fn same_seed_same_bytes() {
        let t = small_table(3);
        let w = small_workload(&t, 60, 4);
        let opts = TrainOptions {
            bins: 128,
            seed: 42,
            ecn: Some(TrainConfig { epochs: 2, ..TrainConfig::default() }),
        };
        let (b1, _) = train_bundle(&t, &w, &opts).unwrap();
        let (b2, _) = train_bundle(&t, &w, &opts).unwrap();
        assert_eq!(to_bytes(&b1), to_bytes(&b2), "training is not deterministic");
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let t = small_table(5);
        let opts = TrainOptions { bins: 128, seed: 7, ecn: None };
        let (seq, _) = train_bundle(&t, &[], &opts).unwrap();

        // exercise the parallel code path directly (env vars are process
        // globals; tests must not set them)
        let mut summary = TrainSummary::default();
        let par = fit_jpe(&t, 128, 7, 4, &mut summary).unwrap();
        assert_eq!(seq.dvine.thetas().upper(), par.thetas().upper());
        for (a, b) in seq.dvine.marginals().iter().zip(par.marginals()) {
            assert_eq!(a.knots_y(), b.knots_y());
        }
    }

    #[test]
    fn jpe_only_training_skips_ecn_and_workload() {
        let t = small_table(11);
        let (b, summary) = train_bundle(&t, &[], &TrainOptions { bins: 64, seed: 1, ecn: None })
            .unwrap();
        assert!(b.ecn.is_none());
        assert!(summary.stages.iter().all(|s| s.name != "ecn"));
    }

    #[test]
    fn ecn_without_workload_is_a_stage_error() {
        let t = small_table(13);
        let err = train_bundle(&t, &[], &TrainOptions::default()).unwrap_err();
        assert!(matches!(err, PipelineError::EmptyWorkload));
        assert!(err.to_string().contains("stage ecn"));
    }

    #[test]
    fn stage_times_cover_the_pipeline() {
        let t = small_table(17);
        let w = small_workload(&t, 40, 2);
        let opts = TrainOptions {
            bins: 64,
            seed: 3,
            ecn: Some(TrainConfig { epochs: 1, ..TrainConfig::default() }),
        };
        let (_, summary) = train_bundle(&t, &w, &opts).unwrap();
        let names: Vec<_> = summary.stages.iter().map(|s| s.name).collect();
        assert_eq!(names, ["marginals", "dequantize", "thetas", "featurize", "ecn"]);
        assert!(summary.total_seconds() > 0.0);
    }

    #[test]
    fn partial_update_tracks_new_data_and_keeps_ecn() {
        let t0 = small_table(19);
        let w = small_workload(&t0, 50, 6);
        let opts = TrainOptions {
            bins: 64,
            seed: 5,
            ecn: Some(TrainConfig { epochs: 1, ..TrainConfig::default() }),
        };
        let (mut bundle, _) = train_bundle(&t0, &w, &opts).unwrap();
        let old_ecn_bytes = bundle.ecn.as_ref().map(|e| e.weights()[0].clone());

        // append rows then PU: row count and marginals move, ECN does not
        let mut t1 = t0.clone();
        let extra: Vec<Vec<f64>> = (0..300)
            .map(|i| vec![(i % 10) as f64 + 0.5, 0.25, (i % 8) as f64])
            .collect();
        t1.append_rows(&extra).unwrap();
        partial_update(&mut bundle, &t1).unwrap();

        assert_eq!(bundle.dvine.row_count(), 3_300);
        assert_eq!(bundle.ecn.as_ref().map(|e| e.weights()[0].clone()), old_ecn_bytes);
        assert_eq!(bundle.columns[0].domain_hi, t1.meta(0).domain_hi);
    }

    #[test]
    fn no_op_update_reproduces_the_jpe_exactly() {
        let t = small_table(23);
        let (mut bundle, _) =
            train_bundle(&t, &[], &TrainOptions { bins: 64, seed: 9, ecn: None }).unwrap();
        let before = to_bytes(&bundle);
        partial_update(&mut bundle, &t).unwrap();
        assert_eq!(before, to_bytes(&bundle), "refit on identical data drifted");
    }

    #[test]
    fn full_update_replaces_the_ecn() {
        let t = small_table(29);
        let w = small_workload(&t, 50, 8);
        let opts = TrainOptions {
            bins: 64,
            seed: 5,
            ecn: Some(TrainConfig { epochs: 1, ..TrainConfig::default() }),
        };
        let (mut bundle, _) = train_bundle(&t, &w, &opts).unwrap();
        let old = bundle.ecn.as_ref().unwrap().weights()[0].clone();

        let mut t1 = t.clone();
        t1.append_rows(&[vec![5.0, 0.0, 1.0]]).unwrap();
        let w1 = small_workload(&t1, 50, 10);
        let summary = full_update(
            &mut bundle,
            &t1,
            &w1,
            &TrainConfig { epochs: 1, seed: 77, ..TrainConfig::default() },
        )
        .unwrap();
        assert_ne!(bundle.ecn.as_ref().unwrap().weights()[0], old);
        assert!(summary.ecn_report.is_some());
    }
}
