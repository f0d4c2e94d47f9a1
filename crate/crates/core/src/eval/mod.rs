//! Scoring matchings against ground truth and running benchmark experiments.

mod synth;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineError, ted_match_with_deadline};
use crate::graph::Matching;
use crate::mutation::{BundleError, LOG_FILE, MutantBundle, MutationLog, ground_truth};
use crate::params::SftmParams;
use crate::pipeline::{MatchError, match_trees_with_deadline};
use crate::tree::NodeId;

pub use synth::synthetic_page;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(450);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sftm,
    Ted,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Sftm => "sftm",
            Algorithm::Ted => "ted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub page: String,
    pub algorithm: String,
    pub mutation_ratio: f64,
    pub elapsed: f64,
    pub mismatch: usize,
    pub no_match: usize,
    pub successful: usize,
    pub successful_match_rate: f64,
    pub optimal_rate: f64,
}

/// Classifies every source node as successful, mismatched or unmatched.
/// `truth` holds the ground-truth `(source, mutant)` pairs. The report's
/// `optimal_rate` is `|truth| / d_size`; page metadata is left empty.
pub fn score_matching(matching: &Matching, truth: &[(NodeId, NodeId)], d_size: usize) -> QualityReport {
    let mut expected = vec![None; d_size];
    for &(n, m) in truth {
        expected[n.index()] = Some(m);
    }
    let (mut successful, mut mismatch) = (0, 0);
    for p in matching.pairs() {
        if expected[p.n.index()] == Some(p.m) {
            successful += 1;
        } else {
            mismatch += 1;
        }
    }
    let ratio = |k: usize| if d_size == 0 { 1.0 } else { k as f64 / d_size as f64 };
    QualityReport {
        page: String::new(),
        algorithm: String::new(),
        mutation_ratio: 0.0,
        elapsed: 0.0,
        mismatch,
        no_match: d_size - successful - mismatch,
        successful,
        successful_match_rate: ratio(successful),
        optimal_rate: ratio(truth.len()),
    }
}

/// Share of source nodes that still have a counterpart in the mutant.
pub fn optimal_rate(d_size: usize, log: &MutationLog) -> f64 {
    if d_size == 0 {
        return 1.0;
    }
    (d_size - log.removed_signatures.len()) as f64 / d_size as f64
}

/// One CSV row. Quality columns are empty on timeout rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub page: String,
    pub algorithm: Algorithm,
    pub n_nodes: usize,
    pub mutation_ratio: f64,
    pub elapsed_s: f64,
    pub mismatch: Option<usize>,
    pub no_match: Option<usize>,
    pub successful: Option<usize>,
    pub rate: Option<f64>,
    pub optimal_rate: f64,
    pub alpha: f64,
    pub seed: u64,
    pub timeout: bool,
}

pub const CSV_HEADER: &str =
    "page,algorithm,n_nodes,mutation_ratio,elapsed_s,mismatch,no_match,successful,rate,optimal_rate,alpha,seed,timeout";

pub fn write_csv<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BenchRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("could not build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Directories under `root` holding a mutant bundle, sorted.
pub fn find_bundles(root: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut found = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().unwrap_or(root).to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_dir() && entry.path().join(LOG_FILE).is_file() {
            found.push(entry.into_path());
        }
    }
    found.sort();
    Ok(found)
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub algorithms: Vec<Algorithm>,
    pub timeout: Duration,
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            algorithms: vec![Algorithm::Sftm],
            timeout: DEFAULT_TIMEOUT,
            jobs: 1,
        }
    }
}

#[derive(Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Bundles that could not be read.
    pub skipped: Vec<(PathBuf, BundleError)>,
}

fn page_name(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let parts: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
    if parts.is_empty() {
        ".".to_owned()
    } else {
        parts.join("/")
    }
}

/// Runs one algorithm on one bundle. Matching time covers everything after
/// the trees are in memory.
pub fn run_pair(
    bundle: &MutantBundle,
    page: &str,
    algorithm: Algorithm,
    params: &SftmParams,
    timeout: Duration,
) -> BenchRow {
    let (source, mutant) = (&bundle.source, &bundle.mutant);
    let start = Instant::now();
    let deadline = Some(start + timeout);
    let matching = match algorithm {
        Algorithm::Sftm => match match_trees_with_deadline(source, mutant, params, deadline) {
            Ok(out) => Some(out.matching),
            Err(MatchError::Timeout) => None,
            Err(MatchError::Params(e)) => panic!("parameters are validated before benchmarking: {e}"),
        },
        Algorithm::Ted => match ted_match_with_deadline(source, mutant, deadline) {
            Ok(out) => Some(out.matching),
            Err(BaselineError::Timeout) => None,
            Err(e) => unreachable!("tree edit distance failed: {e}"),
        },
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let d_size = source.size();
    let optimal = optimal_rate(d_size, &bundle.log);
    let mut row = BenchRow {
        page: page.to_owned(),
        algorithm,
        n_nodes: d_size,
        mutation_ratio: bundle.log.ratio,
        elapsed_s,
        mismatch: None,
        no_match: None,
        successful: None,
        rate: None,
        optimal_rate: optimal,
        alpha: params.alpha,
        seed: params.seed,
        timeout: matching.is_none(),
    };
    if let Some(matching) = matching {
        // Bundles are written by `mutate`, which keeps signatures unique.
        let truth = ground_truth(source, mutant).unwrap_or_default();
        let q = score_matching(&matching, &truth, d_size);
        row.mismatch = Some(q.mismatch);
        row.no_match = Some(q.no_match);
        row.successful = Some(q.successful);
        row.rate = Some(q.successful_match_rate);
    }
    row
}

/// Benchmarks every bundle under `corpus_dir` with each algorithm. Rows come
/// out in bundle order, then algorithm order, whatever the worker count.
pub fn run_benchmark(
    corpus_dir: &Path,
    params: &SftmParams,
    options: &BenchOptions,
) -> Result<BenchReport, CorpusError> {
    let dirs = find_bundles(corpus_dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.jobs.max(1)).build()?;
    let results: Vec<Result<Vec<BenchRow>, (PathBuf, BundleError)>> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let bundle = MutantBundle::read(dir).map_err(|e| (dir.clone(), e))?;
                let page = page_name(corpus_dir, dir);
                Ok(options
                    .algorithms
                    .iter()
                    .map(|&a| run_pair(&bundle, &page, a, params, options.timeout))
                    .collect())
            })
            .collect()
    });
    let mut report = BenchReport::default();
    for r in results {
        match r {
            Ok(rows) => report.rows.extend(rows),
            Err(skip) => report.skipped.push(skip),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub pairs: usize,
    pub timeouts: usize,
    pub mean_rate: f64,
    pub mean_elapsed_s: f64,
}

/// Averages SFTM accuracy and time over `rows`, ignoring timeouts for the
/// accuracy mean.
pub fn summarize(alpha: f64, rows: &[BenchRow]) -> SweepRow {
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let times: Vec<f64> = rows.iter().map(|r| r.elapsed_s).collect();
    SweepRow {
        alpha,
        pairs: rows.len(),
        timeouts: rows.iter().filter(|r| r.timeout).count(),
        mean_rate: mean(&rates),
        mean_elapsed_s: mean(&times),
    }
}

/// One SFTM benchmark per `alpha`, summarized.
pub fn sensitivity_sweep(
    corpus_dir: &Path,
    alphas: &[f64],
    params: &SftmParams,
    options: &BenchOptions,
) -> Result<(Vec<SweepRow>, BenchReport), CorpusError> {
    let options = BenchOptions {
        algorithms: vec![Algorithm::Sftm],
        ..options.clone()
    };
    let mut summary = Vec::new();
    let mut all = BenchReport::default();
    for &alpha in alphas {
        let p = SftmParams { alpha, ..params.clone() };
        let report = run_benchmark(corpus_dir, &p, &options)?;
        if report.rows.is_empty() {
            continue;
        }
        summary.push(summarize(alpha, &report.rows));
        all.rows.extend(report.rows);
        if all.skipped.is_empty() {
            all.skipped = report.skipped;
        }
    }
    Ok((summary, all))
}

pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["alpha", "pairs", "timeouts", "mean_rate", "mean_elapsed_s"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least two distinct sizes to fit")]
    Degenerate,
}

/// Least squares of `y` against `x`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit, FitError> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return Err(FitError::Degenerate);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // Constant times are fit exactly by a flat line.
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fits elapsed seconds against `n · ln n` over `(n_nodes, elapsed_s)` rows.
pub fn scaling_fit(rows: &[(usize, f64)]) -> Result<LinearFit, FitError> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(n, t)| {
            let n = n as f64;
            (n * n.ln(), t)
        })
        .collect();
    linear_fit(&points)
}
