use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sftm::baseline::ted_match;
use sftm::eval::{self, Algorithm, BenchOptions, DEFAULT_TIMEOUT, score_matching};
use sftm::mutation::{self, MutantBundle, MutationError};
use sftm::tree::{LabeledTree, parse_html, parse_tree_json};
use sftm::{SftmParams, match_trees};

#[derive(Parser)]
#[command(name = "sftm", version, about = "Flexible tree matching for HTML documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match two documents and write the matching as JSON.
    Match(MatchArgs),
    /// Write ground-truth-labeled mutants of a document.
    Mutate(MutateArgs),
    /// Benchmark matchers over a corpus of mutant bundles.
    Bench(BenchArgs),
    /// Sweep the token-threshold exponent over a corpus.
    Sweep(SweepArgs),
}

/// Matcher parameters. Flags override values read from `--config`.
#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// JSON run configuration; see the README for its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Token threshold exponent: tokens held by more than ceil(N^alpha) source nodes are ignored [default: 0.5]
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated propagation weights w0,..,wp; p is their count minus one [default: 1,0.5,0.25]
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Inverse temperature of the search objective [default: 4]
    #[arg(long)]
    beta: Option<f64>,
    /// Per-edge selection probability when completing a proposal [default: 0.9]
    #[arg(long)]
    gamma: Option<f64>,
    /// Metropolis iterations [default: 100]
    #[arg(long)]
    iterations: Option<usize>,
    /// Cost of leaving a node unmatched [default: 1]
    #[arg(long)]
    no_match_cost: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Also tokenize element text
    #[arg(long)]
    tokenize_content: bool,
    /// Emit raw token strings without kind prefixes
    #[arg(long)]
    flat_tokens: bool,
}

/// Everything a run needs, as stored in `--config` files and sidecars.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    params: SftmParams,
    algorithms: Vec<Algorithm>,
    timeout_s: f64,
    jobs: usize,
    alphas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: SftmParams::default(),
            algorithms: vec![Algorithm::Sftm],
            timeout_s: DEFAULT_TIMEOUT.as_secs_f64(),
            jobs: 1,
            alphas: vec![0.3, 0.5, 0.8, 1.0],
        }
    }
}

impl ParamArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let p = &mut config.params;
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(w) = &self.weights {
            *p = p.clone().with_weights(w.clone());
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.iterations {
            p.iterations = v;
        }
        if let Some(v) = self.no_match_cost {
            p.no_match_cost = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        p.tokenizer.tokenize_content |= self.tokenize_content;
        p.tokenizer.flat_tokens |= self.flat_tokens;
        p.validate()?;
        Ok(config)
    }
}

fn echo_params(p: &SftmParams) {
    eprintln!(
        "params: alpha={} p={} weights={:?} beta={} gamma={} iterations={} no_match_cost={} seed={} tokenize_content={} flat_tokens={}",
        p.alpha,
        p.p,
        p.weights,
        p.beta,
        p.gamma,
        p.iterations,
        p.no_match_cost,
        p.seed,
        p.tokenizer.tokenize_content,
        p.tokenizer.flat_tokens
    );
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Auto,
    Html,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Sftm,
    Ted,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Sftm => Algorithm::Sftm,
            AlgorithmArg::Ted => Algorithm::Ted,
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// Source document, HTML or tree JSON
    src: PathBuf,
    /// Target document, HTML or tree JSON
    dst: PathBuf,
    /// Where to write the matching JSON
    #[arg(long, short, default_value = "matching.json")]
    out: PathBuf,
    /// Input format; `auto` picks by extension (.json, otherwise HTML)
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Sftm)]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct MutateArgs {
    /// Source document, HTML or tree JSON
    src: PathBuf,
    /// Largest mutation ratio; bundle k of N gets ratio k * RATIO / N
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Number of mutants
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Seed for signatures and mutations
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; bundles go to OUT/00, OUT/01, ...
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory searched recursively for mutant bundles
    corpus: PathBuf,
    /// Output CSV; a `.config.json` sidecar is written next to it
    #[arg(long, short, default_value = "bench.csv")]
    out: PathBuf,
    /// Algorithms to run, repeatable [default: sftm]
    #[arg(long = "algorithm", value_enum)]
    algorithms: Vec<AlgorithmArg>,
    /// Worker threads [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-run timeout in seconds [default: 450]
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory searched recursively for mutant bundles
    corpus: PathBuf,
    /// Comma-separated alpha values [default: 0.3,0.5,0.8,1.0]
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, short, default_value = "sweep.csv")]
    out: PathBuf,
    /// Worker threads [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-run timeout in seconds [default: 450]
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
}

fn load_tree(path: &Path, format: Format) -> Result<LabeledTree> {
    let format = match format {
        Format::Auto => match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "json" => Format::Json,
            _ => Format::Html,
        },
        f => f,
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let tree = match format {
        Format::Json => {
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
            parse_tree_json(&text)?
        }
        _ => parse_html(&bytes).with_context(|| format!("parsing {}", path.display()))?,
    };
    Ok(tree)
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let config = args.params.resolve()?;
    echo_params(&config.params);
    let t1 = load_tree(&args.src, args.format)?;
    let t2 = load_tree(&args.dst, args.format)?;

    let start = Instant::now();
    let (matching, edges, cost) = match args.algorithm {
        AlgorithmArg::Sftm => {
            let out = match_trees(&t1, &t2, &config.params)?;
            (out.matching, Some(out.edge_count), out.cost)
        }
        AlgorithmArg::Ted => {
            let out = ted_match(&t1, &t2);
            (out.matching, None, f64::from(out.distance))
        }
    };
    let elapsed = start.elapsed();

    let json = serde_json::to_string_pretty(&matching.to_json(&t1, &t2))?;
    fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display()))?;

    println!("nodes: {} -> {}", t1.size(), t2.size());
    if let Some(edges) = edges {
        println!("edges: {edges}");
    }
    println!("pairs: {}", matching.pairs().len());
    let label = if args.algorithm == AlgorithmArg::Ted { "distance" } else { "best cost" };
    println!("{label}: {cost:.6}");
    // Ground truth is known when both trees are signed or when they are identical.
    let truth = if t1 == t2 {
        Some(t1.ids().map(|i| (i, i)).collect())
    } else if t1.has_signatures() && t2.has_signatures() {
        mutation::ground_truth(&t1, &t2).ok()
    } else {
        None
    };
    if let Some(truth) = truth {
        let q = score_matching(&matching, &truth, t1.size());
        println!(
            "rate: {:.4} (successful {}, mismatch {}, no match {})",
            q.successful_match_rate, q.successful, q.mismatch, q.no_match
        );
    }
    println!("elapsed: {:.3}s", elapsed.as_secs_f64());
    Ok(())
}

/// Ratios `k * ratio / count` for `k` in `0..count`.
fn mutation_ratios(ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| k as f64 * ratio / count as f64).collect()
}

fn cmd_mutate(args: MutateArgs) -> Result<()> {
    if !(0.0..=0.5).contains(&args.ratio) {
        bail!("--ratio must lie in [0, 0.5]");
    }
    let source = mutation::assign_signatures(&load_tree(&args.src, args.format)?, args.seed);
    let page = args
        .src
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ratios = mutation_ratios(args.ratio, args.count);
    for (k, ratio) in ratios.into_iter().enumerate() {
        let seed = args.seed.wrapping_add(k as u64);
        let (mutant, mut log) = match mutation::mutate(&source, ratio, seed) {
            Ok(r) => r,
            Err(e @ MutationError::ExhaustedTargets { .. }) => bail!("mutant {k} (ratio {ratio}): {e}"),
            Err(e) => return Err(e.into()),
        };
        log.source_page = page.clone();
        let dir = args.out.join(format!("{k:02}"));
        MutantBundle {
            source: source.clone(),
            mutant,
            log,
        }
        .write(&dir)?;
        println!("{} ratio={ratio}", dir.display());
    }
    Ok(())
}

fn bench_options(config: &RunConfig, jobs: Option<usize>, timeout: Option<f64>) -> Result<BenchOptions> {
    let timeout = timeout.unwrap_or(config.timeout_s);
    if !(timeout >= 0.0 && timeout.is_finite()) {
        bail!("--timeout must be a non-negative number of seconds");
    }
    Ok(BenchOptions {
        algorithms: config.algorithms.clone(),
        timeout: Duration::from_secs_f64(timeout),
        jobs: jobs.unwrap_or(config.jobs).max(1),
    })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    out.with_file_name(name)
}

fn write_sidecar(out: &Path, config: &RunConfig) -> Result<()> {
    let path = sidecar_path(out);
    fs::write(&path, serde_json::to_string_pretty(config)?).with_context(|| format!("writing {}", path.display()))
}

fn report_skipped(report: &eval::BenchReport) -> Result<()> {
    for (path, err) in &report.skipped {
        eprintln!("warning: skipped {}: {err}", path.display());
    }
    if report.rows.is_empty() && !report.skipped.is_empty() {
        bail!("no readable bundles");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut config = args.params.resolve()?;
    if !args.algorithms.is_empty() {
        config.algorithms = args.algorithms.iter().map(|&a| a.into()).collect();
    }
    let options = bench_options(&config, args.jobs, args.timeout)?;
    config.jobs = options.jobs;
    config.timeout_s = options.timeout.as_secs_f64();
    echo_params(&config.params);

    let report = eval::run_benchmark(&args.corpus, &config.params, &options)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    eval::write_csv(&report.rows, file)?;
    write_sidecar(&args.out, &config)?;
    println!("{} rows -> {}", report.rows.len(), args.out.display());
    report_skipped(&report)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut config = args.params.resolve()?;
    if let Some(alphas) = args.alphas {
        config.alphas = alphas;
    }
    for &a in &config.alphas {
        SftmParams { alpha: a, ..config.params.clone() }.validate()?;
    }
    config.algorithms = vec![Algorithm::Sftm];
    let options = bench_options(&config, args.jobs, args.timeout)?;
    config.jobs = options.jobs;
    config.timeout_s = options.timeout.as_secs_f64();
    echo_params(&config.params);

    let (summary, report) = eval::sensitivity_sweep(&args.corpus, &config.alphas, &config.params, &options)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    eval::write_sweep_csv(&summary, file)?;
    write_sidecar(&args.out, &config)?;
    for row in &summary {
        println!(
            "alpha={} pairs={} mean_rate={:.4} mean_elapsed_s={:.4}",
            row.alpha, row.pairs, row.mean_rate, row.mean_elapsed_s
        );
    }
    report_skipped(&report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Mutate(a) => cmd_mutate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_span_the_range() {
        let r = mutation_ratios(0.5, 10);
        assert_eq!(r.len(), 10);
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 0.05).abs() < 1e-12);
        assert!((r[9] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"params": {"alpha": 0.8, "beta": 2.0}, "jobs": 3}"#).unwrap();
        let args = ParamArgs {
            config: Some(path),
            alpha: Some(0.3),
            ..Default::default()
        };
        let config = args.resolve().unwrap();
        assert_eq!(config.params.alpha, 0.3);
        assert_eq!(config.params.beta, 2.0);
        assert_eq!(config.jobs, 3);
        assert_eq!(config.params.gamma, 0.9);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let args = ParamArgs {
            gamma: Some(2.0),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(sidecar_path(Path::new("out/bench.csv")), Path::new("out/bench.csv.config.json"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
