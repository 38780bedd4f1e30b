//! `agtr` — evaluate clusterings and classifiers without reference labels.
//!
//! Exit codes: 0 success (and litmus CONSISTENT), 1 usage or input errors,
//! 2 litmus SUSPECT_OVERFIT, 3 shuffle correlation test failed.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use agtr_core::bounds::{self, BoundReport, ReportedMetrics};
use agtr_core::clustering::Clustering;
use agtr_core::io;
use agtr_core::metrics;
use agtr_core::pehash;
use agtr_core::shuffle;

#[derive(Parser)]
#[command(
    name = "agtr",
    version,
    about = "Bound precision/recall/accuracy against an approximate ground truth refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute precision and recall of a predicted clustering against a
    /// reference clustering (optionally accuracy, for label files).
    Metrics(MetricsArgs),
    /// Compute AGTR bound report for a predicted clustering.
    Bounds(BoundsArgs),
    /// Test previously reported metrics against AGTR bounds.
    Litmus(LitmusArgs),
    /// Run the incremental shuffle / correlation precondition test.
    ShuffleTest(ShuffleArgs),
    /// PE metadata hashing and AGTR construction.
    #[command(subcommand)]
    Pehash(PehashCommand),
    /// Compare several candidate clusterings against one AGTR.
    Compare(CompareArgs),
}

#[derive(Args)]
struct MetricsArgs {
    /// Predicted clustering CSV (or label CSV with --labels).
    #[arg(long)]
    predicted: PathBuf,
    /// Reference clustering CSV (or label CSV with --labels).
    #[arg(long)]
    reference: PathBuf,
    /// Treat the inputs as `sample_id,label` files; unlabeled samples
    /// become singleton clusters.
    #[arg(long)]
    labels: bool,
    /// Also report accuracy via direct label comparison (requires --labels).
    #[arg(long, requires = "labels")]
    accuracy: bool,
}

#[derive(Args)]
struct EpsilonArgs {
    /// Absolute error allowance ε̂.
    #[arg(long, conflicts_with = "epsilon_rate")]
    epsilon_hat: Option<u64>,
    /// ε̂ as a fraction of the dataset size (default 0.01).
    #[arg(long)]
    epsilon_rate: Option<f64>,
}

impl EpsilonArgs {
    fn resolve(&self, m: u64) -> Result<u64> {
        match (self.epsilon_hat, self.epsilon_rate) {
            (Some(eps), _) => Ok(eps),
            (None, Some(rate)) => {
                if !(rate > 0.0 && rate <= 1.0) {
                    bail!("--epsilon-rate must lie in (0, 1], got {rate}");
                }
                Ok(bounds::epsilon_hat_for_rate(m, rate))
            }
            (None, None) => Ok(bounds::default_epsilon_hat(m)),
        }
    }
}

#[derive(Args)]
struct BoundsArgs {
    /// Predicted clustering CSV.
    #[arg(long)]
    predicted: PathBuf,
    /// AGTR clustering CSV.
    #[arg(long)]
    agtr: PathBuf,
    #[command(flatten)]
    epsilon: EpsilonArgs,
}

#[derive(Args)]
struct LitmusArgs {
    /// Predicted clustering CSV.
    #[arg(long)]
    predicted: PathBuf,
    /// AGTR clustering CSV.
    #[arg(long)]
    agtr: PathBuf,
    /// JSON file with the reported metrics under test:
    /// {"source_dataset": ..., "precision": ..., "recall": ..., "accuracy": ...}.
    #[arg(long)]
    reported: PathBuf,
    #[command(flatten)]
    epsilon: EpsilonArgs,
}

#[derive(Args)]
struct ShuffleArgs {
    /// Predicted clustering CSV.
    #[arg(long)]
    predicted: PathBuf,
    /// AGTR clustering CSV.
    #[arg(long)]
    agtr: PathBuf,
    /// Fraction of samples shuffled between bound recordings.
    #[arg(long, default_value_t = 0.01)]
    interval: f64,
    /// RNG seed; runs are deterministic per seed.
    #[arg(long)]
    seed: u64,
    /// Correlation threshold both bound series must stay at or below.
    #[arg(long, default_value_t = shuffle::DEFAULT_CORRELATION_THRESHOLD, allow_hyphen_values = true)]
    threshold: f64,
    /// Write the record series as CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Render the record series as a static SVG chart.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    epsilon: EpsilonArgs,
}

#[derive(Subcommand)]
enum PehashCommand {
    /// Digest PE files (or directory trees of them) into a digest CSV.
    Scan(ScanArgs),
    /// Group a digest CSV into an AGTR clustering CSV.
    BuildAgtr(BuildAgtrArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// Files or directories to scan (directories are walked recursively).
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Output digest CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildAgtrArgs {
    /// Input digest CSV from `pehash scan`.
    #[arg(long)]
    digests: PathBuf,
    /// Output clustering CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// AGTR clustering CSV.
    #[arg(long)]
    agtr: PathBuf,
    #[command(flatten)]
    epsilon: EpsilonArgs,
    /// Candidates as name=clustering.csv pairs.
    #[arg(required = true, value_name = "NAME=FILE")]
    candidates: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Metrics(args) => cmd_metrics(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Litmus(args) => cmd_litmus(args),
        Command::ShuffleTest(args) => cmd_shuffle(args),
        Command::Pehash(PehashCommand::Scan(args)) => cmd_scan(args),
        Command::Pehash(PehashCommand::BuildAgtr(args)) => cmd_build_agtr(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn load_clustering(path: &Path) -> Result<Clustering> {
    io::load_clustering(path).with_context(|| format!("reading clustering {}", path.display()))
}

fn cmd_metrics(args: MetricsArgs) -> Result<u8> {
    let (predicted, reference, accuracy_report) = if args.labels {
        let predicted_labels = io::load_labels(&args.predicted)
            .with_context(|| format!("reading labels {}", args.predicted.display()))?;
        let reference_labels = io::load_labels(&args.reference)
            .with_context(|| format!("reading labels {}", args.reference.display()))?;
        let accuracy_report = if args.accuracy {
            Some(metrics::accuracy(&predicted_labels, &reference_labels)?)
        } else {
            None
        };
        (
            Clustering::from_labels(&predicted_labels)?,
            Clustering::from_labels(&reference_labels)?,
            accuracy_report,
        )
    } else {
        (
            load_clustering(&args.predicted)?,
            load_clustering(&args.reference)?,
            None,
        )
    };
    let precision = metrics::precision(&predicted, &reference)?;
    let recall = metrics::recall(&predicted, &reference)?;
    let mut output = json!({
        "m": predicted.universe_size(),
        "predicted_clusters": predicted.cluster_count(),
        "reference_clusters": reference.cluster_count(),
        "precision": precision,
        "recall": recall,
    });
    if let Some(report) = accuracy_report {
        output["accuracy"] = serde_json::to_value(report.accuracy)?;
        output["accuracy_disjoint_vocabularies"] = json!(report.disjoint_vocabularies);
        if report.disjoint_vocabularies {
            eprintln!(
                "warning: predicted and reference label vocabularies are disjoint; \
                 the identity mapping behind accuracy does not apply"
            );
        }
    }
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(0)
}

fn compute_bounds(predicted: &Path, agtr: &Path, epsilon: &EpsilonArgs) -> Result<BoundReport> {
    let c = load_clustering(predicted)?;
    let r_hat = load_clustering(agtr)?;
    let epsilon_hat = epsilon.resolve(c.universe_size() as u64)?;
    Ok(bounds::agtr_bounds(&c, &r_hat, epsilon_hat)?)
}

fn cmd_bounds(args: BoundsArgs) -> Result<u8> {
    let report = compute_bounds(&args.predicted, &args.agtr, &args.epsilon)?;
    let bytes = io::write_bound_report(&report, None)?;
    print!("{}", String::from_utf8(bytes)?);
    Ok(0)
}

fn cmd_litmus(args: LitmusArgs) -> Result<u8> {
    let reported: ReportedMetrics = serde_json::from_reader(
        std::fs::File::open(&args.reported)
            .with_context(|| format!("reading reported metrics {}", args.reported.display()))?,
    )
    .context("parsing reported metrics JSON")?;
    reported.validate()?;
    let report = compute_bounds(&args.predicted, &args.agtr, &args.epsilon)?;
    let verdict = bounds::litmus_test(&reported, &report);
    let bytes = io::write_bound_report(&report, Some(&verdict))?;
    print!("{}", String::from_utf8(bytes)?);
    Ok(if verdict.any_suspect() { 2 } else { 0 })
}

fn cmd_shuffle(args: ShuffleArgs) -> Result<u8> {
    if !(args.interval > 0.0 && args.interval <= 1.0) {
        bail!("--interval must lie in (0, 1], got {}", args.interval);
    }
    let c = load_clustering(&args.predicted)?;
    let r_hat = load_clustering(&args.agtr)?;
    let epsilon_hat = args.epsilon.resolve(c.universe_size() as u64)?;
    let records = shuffle::shuffle_run(&c, &r_hat, epsilon_hat, args.interval, args.seed)?;
    if let Some(path) = &args.records {
        io::write_records(&records, std::fs::File::create(path)?)?;
    }
    if let Some(path) = &args.plot {
        plot::render_records(&records, path)?;
    }
    let report = shuffle::correlation_test(&records, args.threshold)?;
    let output = json!({
        "m": c.universe_size(),
        "epsilon_hat": epsilon_hat,
        "interval": args.interval,
        "seed": args.seed,
        "n_points": report.n_points,
        "r_precision": report.r_precision,
        "r_recall": report.r_recall,
        "p_precision": report.p_precision,
        "p_precision_display": shuffle::format_p_value(report.p_precision),
        "p_recall": report.p_recall,
        "p_recall_display": shuffle::format_p_value(report.p_recall),
        "threshold": report.threshold,
        "pass": report.pass,
    });
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(if report.pass { 0 } else { 3 })
}

fn cmd_scan(args: ScanArgs) -> Result<u8> {
    let mut files: Vec<PathBuf> = Vec::new();
    for path in &args.paths {
        if path.is_dir() {
            for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
                let entry = entry?;
                if entry.file_type().is_file() {
                    files.push(entry.into_path());
                }
            }
        } else if path.is_file() {
            files.push(path.clone());
        } else {
            bail!("{} is neither a file nor a directory", path.display());
        }
    }
    files.sort();
    files.dedup();

    let mut rows = Vec::with_capacity(files.len());
    for file in &files {
        let data = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
        let (digest, status) = match pehash::pehash_of_bytes(&data) {
            Ok(digest) => (Some(digest), "ok".to_string()),
            Err(err) => (None, err.status_name().to_string()),
        };
        rows.push(io::DigestRow {
            sample_id: agtr_core::SampleId::new(file.display().to_string())?,
            digest,
            status,
        });
    }
    io::write_digests(&rows, std::fs::File::create(&args.out)?)?;
    eprintln!("scanned {} files -> {}", rows.len(), args.out.display());
    Ok(0)
}

fn cmd_build_agtr(args: BuildAgtrArgs) -> Result<u8> {
    let rows = io::read_digests(
        std::fs::File::open(&args.digests)
            .with_context(|| format!("reading digests {}", args.digests.display()))?,
    )?;
    let agtr = pehash::build_agtr(rows.into_iter().map(|row| (row.sample_id, row.digest)))?;
    io::save_clustering(&agtr, &args.out)?;
    eprintln!(
        "built AGTR with {} clusters over {} samples -> {}",
        agtr.cluster_count(),
        agtr.universe_size(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    let r_hat = load_clustering(&args.agtr)?;
    let mut candidates = Vec::with_capacity(args.candidates.len());
    for spec in &args.candidates {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("candidate `{spec}` is not of the form NAME=FILE"))?;
        candidates.push((name.to_string(), load_clustering(Path::new(path))?));
    }
    let epsilon_hat = args.epsilon.resolve(r_hat.universe_size() as u64)?;
    let reports = bounds::compare_bounds(&candidates, &r_hat, epsilon_hat)?;
    let output = json!({
        "epsilon_hat": epsilon_hat,
        "candidates": reports,
    });
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(0)
}
