//! Command-line surface: train, estimate, gen-workload, label, evaluate,
//! update.
//!
//! Exit codes are stage-distinct so scripts can tell where a pipeline
//! broke:
//!
//! | code | stage |
//! |------|-------|
//! | 0    | success |
//! | 2    | argument parsing (clap) |
//! | 3    | data loading |
//! | 4    | workload / query handling |
//! | 5    | training pipeline |
//! | 6    | model file io |
//! | 7    | evaluation |
//!
//! Every subcommand is deterministic under a fixed `--seed` (timings
//! aside). `COLSE_THREADS` caps the parallel stages (marginal fits, θ
//! fits, featurization); unset means single-threaded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use colse_core::ecn::TrainConfig;
use colse_core::jpe::project_query;
use colse_core::table::{EncodeError, Table};
use colse_core::workload::{generate, label, CenterDist, LabeledQuery, QuerySpec, WorkloadConfig};

use crate::eval::{evaluate, render_flat, render_per_query, render_text, EvalOptions};
use crate::ingest::load_csv;
use crate::persist::{load, save, ModelBundle};
use crate::train::{configured_threads, full_update, partial_update, train_bundle, TrainOptions};
use crate::workload_io;

pub const EXIT_DATA: u8 = 3;
pub const EXIT_WORKLOAD: u8 = 4;
pub const EXIT_TRAIN: u8 = 5;
pub const EXIT_MODEL_IO: u8 = 6;
pub const EXIT_EVAL: u8 = 7;

#[derive(Parser)]
#[command(
    name = "colse",
    about = "Copula-based selectivity estimation over single tables",
    version
)]
pub struct Cli {
    /// Print extra diagnostics (fingerprints, thread counts).
    #[arg(long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit marginals and pairwise dependence, optionally train the error
    /// network, and write a model file.
    Train(TrainArgs),
    /// Estimate selectivity/cardinality for one query or a workload file.
    Estimate(EstimateArgs),
    /// Generate a random query workload against a data file.
    GenWorkload(GenWorkloadArgs),
    /// Fill in exact true counts for a workload by full scan.
    Label(LabelArgs),
    /// Score a model against a labeled workload and emit reports.
    Evaluate(EvaluateArgs),
    /// Refit a model after data changes (pu: marginals + thetas; fu:
    /// additionally retrain the error network).
    Update(UpdateArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Destination model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Spline resolution per marginal.
    #[arg(long, default_value_t = colse_core::marginal::DEFAULT_BINS)]
    pub bins: usize,
    /// Labeled workload for the error network; required unless --no-ecn.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub ecn_epochs: usize,
    /// Build a JPE-only model (no error network).
    #[arg(long)]
    pub no_ecn: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One query, e.g. "a1 >= 10 AND a1 <= 20 AND tag = 'x'".
    #[arg(long, conflicts_with = "workload")]
    pub query: Option<String>,
    /// Workload file; estimates printed one line per query.
    #[arg(long)]
    pub workload: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenWorkloadArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Fix the predicate count per query (default: uniform 1..=columns).
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, value_enum, default_value_t = CenterArg::Data)]
    pub center: CenterArg,
    /// Interval width as a fraction of the domain, lower bound.
    #[arg(long, default_value_t = 0.01)]
    pub width_min: f64,
    /// Interval width as a fraction of the domain, upper bound.
    #[arg(long, default_value_t = 0.5)]
    pub width_max: f64,
    /// Probabilities "range,one-sided,eq"; must sum to 1.
    #[arg(long, default_value = "0.7,0.2,0.1")]
    pub op_mix: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Label the generated queries immediately.
    #[arg(long)]
    pub label: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenterArg {
    /// Center intervals on sampled data rows.
    Data,
    /// Center intervals uniformly over the domain.
    Uniform,
}

#[derive(Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub workload: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled workload file.
    #[arg(long)]
    pub workload: PathBuf,
    /// Write the flat name<TAB>value report here (text goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-query records here.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
    /// Latency repetitions per query (median kept).
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Skip latency measurement and compute q-errors on this many threads.
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Args)]
pub struct UpdateArgs {
    /// Existing model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Data file reflecting the post-update table.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: UpdateArg,
    /// Workload to relabel and retrain on; required for fu.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Destination for the refreshed model.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpdateArg {
    Pu,
    Fu,
}

/// Dispatch a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let verbose = cli.verbose;
    match cli.command {
        Command::Train(a) => cmd_train(a, verbose),
        Command::Estimate(a) => cmd_estimate(a, verbose),
        Command::GenWorkload(a) => cmd_gen_workload(a, verbose),
        Command::Label(a) => cmd_label(a, verbose),
        Command::Evaluate(a) => cmd_evaluate(a, verbose),
        Command::Update(a) => cmd_update(a, verbose),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_table(path: &Path, verbose: bool) -> Result<Table, ExitCode> {
    let t = load_csv(path, &[], b',').map_err(|e| fail(EXIT_DATA, e))?;
    if verbose {
        eprintln!(
            "loaded {} rows x {} columns from {} (fingerprint {:016x})",
            t.row_count(),
            t.column_count(),
            path.display(),
            colse_core::table::schema_fingerprint(t.columns())
        );
    }
    Ok(t)
}

fn load_labeled_workload(path: &Path, table: &Table) -> Result<Vec<LabeledQuery>, ExitCode> {
    let entries =
        workload_io::read_workload(path, table.columns()).map_err(|e| fail(EXIT_WORKLOAD, e))?;
    workload_io::require_labels(entries).map_err(|e| fail(EXIT_WORKLOAD, e))
}

fn cmd_train(a: TrainArgs, verbose: bool) -> ExitCode {
    if !a.no_ecn && a.workload.is_none() {
        return fail(EXIT_WORKLOAD, "--workload is required unless --no-ecn is given");
    }
    let table = match load_table(&a.data, verbose) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let workload: Vec<LabeledQuery> = match &a.workload {
        Some(p) if !a.no_ecn => match load_labeled_workload(p, &table) {
            Ok(w) => w,
            Err(c) => return c,
        },
        _ => Vec::new(),
    };

    let opts = TrainOptions {
        bins: a.bins,
        seed: a.seed,
        ecn: (!a.no_ecn).then(|| TrainConfig {
            epochs: a.ecn_epochs,
            seed: a.seed,
            ..TrainConfig::default()
        }),
    };
    if verbose {
        eprintln!("threads: {}", configured_threads());
    }
    let (bundle, summary) = match train_bundle(&table, &workload, &opts) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_TRAIN, e),
    };
    for s in &summary.stages {
        println!("stage {}: {:.3}s", s.name, s.seconds);
    }
    println!("total: {:.3}s", summary.total_seconds());
    match save(&bundle, &a.out) {
        Ok(bytes) => {
            println!("model: {} ({bytes} bytes)", a.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_MODEL_IO, e),
    }
}

fn cmd_estimate(a: EstimateArgs, verbose: bool) -> ExitCode {
    let bundle = match load(&a.model) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_MODEL_IO, e),
    };
    if verbose {
        eprintln!(
            "model: {} columns, {} rows, ecn {}",
            bundle.columns.len(),
            bundle.dvine.row_count(),
            if bundle.ecn.is_some() { "present" } else { "absent" }
        );
    }
    match (&a.query, &a.workload) {
        (Some(q), None) => estimate_one(&bundle, q),
        (None, Some(path)) => estimate_workload(&bundle, path),
        _ => fail(EXIT_WORKLOAD, "pass exactly one of --query or --workload"),
    }
}

/// Estimate a single query; unknown categories warn and score zero.
fn estimate_one(bundle: &ModelBundle, query: &str) -> ExitCode {
    let parsed = match workload_io::parse_line(query) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_WORKLOAD, format_args!("query: {e}")),
    };
    if parsed.count.is_some() {
        return fail(EXIT_WORKLOAD, "a --query string carries no count field");
    }
    let spec = match workload_io::resolve(&bundle.columns, &parsed, 1) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_WORKLOAD, e),
    };
    let rows = bundle.dvine.row_count() as f64;
    match project_and_estimate(bundle, &spec) {
        Ok((jpe, ecn, avi)) => {
            println!("selectivity\tjpe={jpe:.9}\tecn={ecn:.9}\tavi={avi:.9}");
            println!(
                "cardinality\tjpe={:.3}\tecn={:.3}\tavi={:.3}",
                jpe * rows,
                ecn * rows,
                avi * rows
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_WORKLOAD, e),
    }
}

/// Three selectivities for a resolved query; unknown labels mean "matches
/// nothing" and come back as zeros with a warning on stderr.
fn project_and_estimate(
    bundle: &ModelBundle,
    spec: &QuerySpec,
) -> Result<(f64, f64, f64), EncodeError> {
    match project_query(&bundle.columns, &spec.predicates) {
        Ok(q) => {
            let est = bundle.estimate(&q);
            Ok((est.jpe, est.corrected, est.avi))
        }
        Err(EncodeError::UnknownLabel { column, label }) => {
            eprintln!("warning: column '{column}': unknown category '{label}'; selectivity 0");
            Ok((0.0, 0.0, 0.0))
        }
        Err(e) => Err(e),
    }
}

/// Per-query estimates for a workload file, joinable with ground truth:
/// `query_id  true  jpe  ecn  avi` in rows ("-" when unlabeled).
fn estimate_workload(bundle: &ModelBundle, path: &Path) -> ExitCode {
    let entries = match workload_io::read_workload(path, &bundle.columns) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_WORKLOAD, e),
    };
    let rows = bundle.dvine.row_count() as f64;
    println!("query_id\ttrue\tjpe\tecn\tavi");
    for (i, (spec, count)) in entries.iter().enumerate() {
        let (jpe, ecn, avi) = match project_and_estimate(bundle, spec) {
            Ok(x) => x,
            Err(e) => return fail(EXIT_WORKLOAD, format_args!("query {i}: {e}")),
        };
        let truth = count.map(|c| c.to_string()).unwrap_or_else(|| "-".to_string());
        println!(
            "{i}\t{truth}\t{:.3}\t{:.3}\t{:.3}",
            jpe * rows,
            ecn * rows,
            avi * rows
        );
    }
    ExitCode::SUCCESS
}

fn parse_op_mix(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("--op-mix: {e}"))?;
    if parts.len() != 3 {
        return Err("--op-mix needs exactly three comma-separated probabilities".to_string());
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn cmd_gen_workload(a: GenWorkloadArgs, verbose: bool) -> ExitCode {
    let table = match load_table(&a.data, verbose) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let op_mix = match parse_op_mix(&a.op_mix) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_WORKLOAD, e),
    };
    if a.n == 0 {
        return fail(EXIT_WORKLOAD, "--n must be at least 1");
    }
    if !(a.width_min > 0.0 && a.width_min <= a.width_max && a.width_max <= 1.0) {
        return fail(EXIT_WORKLOAD, "width bounds must satisfy 0 < min <= max <= 1");
    }
    let cfg = WorkloadConfig {
        n_queries: a.n,
        fixed_dims: a.dims,
        center: match a.center {
            CenterArg::Data => CenterDist::Data,
            CenterArg::Uniform => CenterDist::Uniform,
        },
        width_range: (a.width_min, a.width_max),
        op_mix,
        seed: a.seed,
    };
    let queries = generate(&table, &cfg);
    let entries: Vec<(QuerySpec, Option<u64>)> = if a.label {
        label(&table, &queries)
            .into_iter()
            .map(|lq| (lq.query, Some(lq.true_count)))
            .collect()
    } else {
        queries.into_iter().map(|q| (q, None)).collect()
    };
    match workload_io::write_workload(&a.out, &table, &entries) {
        Ok(()) => {
            println!("wrote {} queries to {}", entries.len(), a.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_WORKLOAD, e),
    }
}

fn cmd_label(a: LabelArgs, verbose: bool) -> ExitCode {
    let table = match load_table(&a.data, verbose) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let entries = match workload_io::read_workload(&a.workload, table.columns()) {
        Ok(e) => e,
        Err(e) => return fail(EXIT_WORKLOAD, e),
    };
    let specs: Vec<QuerySpec> = entries.into_iter().map(|(q, _)| q).collect();
    let labeled = label(&table, &specs);
    let out: Vec<(QuerySpec, Option<u64>)> =
        labeled.into_iter().map(|lq| (lq.query, Some(lq.true_count))).collect();
    match workload_io::write_workload(&a.out, &table, &out) {
        Ok(()) => {
            println!("labeled {} queries into {}", out.len(), a.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_WORKLOAD, e),
    }
}

fn cmd_evaluate(a: EvaluateArgs, verbose: bool) -> ExitCode {
    let bundle = match load(&a.model) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_MODEL_IO, e),
    };
    let table = match load_table(&a.data, verbose) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let labeled = match load_labeled_workload(&a.workload, &table) {
        Ok(w) => w,
        Err(c) => return c,
    };
    let opts = EvalOptions {
        repetitions: a.repetitions,
        per_query: a.per_query.is_some(),
        parallel_threads: a.parallel.unwrap_or(1),
    };
    let mut report = match evaluate(&bundle, &table, &labeled, &opts) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_EVAL, e),
    };
    report.model_bytes = std::fs::metadata(&a.model).ok().map(|m| m.len());

    print!("{}", render_text(&report));
    if let Some(path) = &a.report {
        if let Err(e) = std::fs::write(path, render_flat(&report)) {
            return fail(EXIT_EVAL, e);
        }
    }
    if let Some(path) = &a.per_query {
        let records = report.per_query.as_deref().unwrap_or(&[]);
        if let Err(e) = std::fs::write(path, render_per_query(records)) {
            return fail(EXIT_EVAL, e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_update(a: UpdateArgs, verbose: bool) -> ExitCode {
    let mut bundle = match load(&a.model) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_MODEL_IO, e),
    };
    let table = match load_table(&a.data, verbose) {
        Ok(t) => t,
        Err(c) => return c,
    };
    // names/kinds/encodings must match; domains and counts may have moved
    let table_fp = colse_core::table::schema_fingerprint(table.columns());
    if bundle.fingerprint() != table_fp {
        return fail(
            EXIT_TRAIN,
            format_args!(
                "data schema (fingerprint {table_fp:016x}) does not match the model ({:016x})",
                bundle.fingerprint()
            ),
        );
    }

    let t0 = std::time::Instant::now();
    let summary = match a.mode {
        UpdateArg::Pu => partial_update(&mut bundle, &table),
        UpdateArg::Fu => {
            let path = match &a.workload {
                Some(p) => p,
                None => return fail(EXIT_WORKLOAD, "--mode fu requires --workload"),
            };
            let entries = match workload_io::read_workload(path, table.columns()) {
                Ok(e) => e,
                Err(e) => return fail(EXIT_WORKLOAD, e),
            };
            let specs: Vec<QuerySpec> = entries.into_iter().map(|(q, _)| q).collect();
            // counts in the file describe the old table; relabel on the new
            let relabeled = label(&table, &specs);
            let cfg = TrainConfig { seed: a.seed, ..TrainConfig::default() };
            full_update(&mut bundle, &table, &relabeled, &cfg)
        }
    };
    let summary = match summary {
        Ok(s) => s,
        Err(e) => return fail(EXIT_TRAIN, e),
    };
    for s in &summary.stages {
        println!("stage {}: {:.3}s", s.name, s.seconds);
    }
    println!("update: {:.3}s", t0.elapsed().as_secs_f64());
    match save(&bundle, &a.out) {
        Ok(bytes) => {
            println!("model: {} ({bytes} bytes)", a.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_MODEL_IO, e),
    }
}
