use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fewshot_cli::analyses;
use fewshot_cli::config::ExperimentConfig;
use fewshot_cli::error::{CliError, Result};
use fewshot_cli::io::{self, PostFormat};
use fewshot_cli::report;
use fewshot_cli::runner;

use fewshot_core::corpus::{dedup_repository, DedupDenominator};
use fewshot_core::select::Strategy;

#[derive(Parser)]
#[command(name = "fewshot", version, about = "Few-shot text classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment sweep described by a config file.
    Run(RunArgs),
    /// Remove repository posts nearly identical to evaluation posts.
    Dedup(DedupArgs),
    /// Measure how lexicon hits correlate with the positive class.
    KeywordCorr(KeywordCorrArgs),
    /// Evaluate lexicon and nearest-neighbor baselines.
    Baselines(BaselinesArgs),
    /// Render a saved run summary as a table or CSV.
    Report(ReportArgs),
    /// Term overlap between each query and its prompt shots.
    TermOverlap(TermOverlapArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output root; results land under <out>/runs/<fingerprint>/.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the base selection seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the shot count.
    #[arg(long)]
    k: Option<usize>,
    /// Override the selection strategy.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Override the scorer endpoint.
    #[arg(long)]
    endpoint: Option<String>,
    /// Keep the full prompt text in predictions.jsonl.
    #[arg(long)]
    save_prompts: bool,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown strategy '{s}' (expected random, random_balanced, similarity_balanced, or stratified_balanced)"))
}

#[derive(Args)]
struct DedupArgs {
    /// Labeled repository (JSONL or CSV).
    #[arg(long)]
    repository: PathBuf,
    /// Evaluation posts to dedup against.
    #[arg(long)]
    queries: PathBuf,
    /// Task name from the builtin catalog.
    #[arg(long)]
    task: Option<String>,
    /// Task definition file (JSON) as an alternative to --task.
    #[arg(long)]
    task_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Where to write the kept repository (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Where to write the removal report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct KeywordCorrArgs {
    #[arg(long)]
    repository: PathBuf,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    task_file: Option<PathBuf>,
    /// Lexicon file, one term per line.
    #[arg(long)]
    lexicon: PathBuf,
}

#[derive(Args)]
struct BaselinesArgs {
    #[arg(long)]
    repository: PathBuf,
    /// Labeled evaluation posts.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    task_file: Option<PathBuf>,
    /// Lexicon files; each becomes one baseline named after its stem.
    #[arg(long, required = true)]
    lexicon: Vec<PathBuf>,
    /// Neighbor count for the TF-IDF vote baseline.
    #[arg(long, default_value_t = 32)]
    vote_k: usize,
    #[arg(long, default_value_t = 2)]
    min_token_len: usize,
    /// Write the full report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// summary.json from a previous run.
    #[arg(long)]
    summary: PathBuf,
    /// Aggregate row label to report relative AUC against.
    #[arg(long)]
    reference: Option<String>,
    /// Also write the aggregates as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TermOverlapArgs {
    /// predictions.jsonl from a run cell.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    task_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.selection.seed = seed;
    }
    if let Some(k) = args.k {
        config.selection.k = k;
    }
    if let Some(strategy) = args.strategy {
        config.selection.strategy = strategy;
    }
    if let Some(endpoint) = args.endpoint {
        config.scorer.endpoint = Some(endpoint);
    }
    if args.save_prompts {
        config.output.save_prompts = true;
    }
    config.validate()?;

    let (summary, path) = runner::run_experiment(&config, &args.out)?;
    println!("{}", report::render_table(&summary, None)?);
    println!("summary written to {}", path.display());
    Ok(())
}

fn cmd_dedup(args: DedupArgs) -> Result<()> {
    let task = io::resolve_task(args.task.as_deref(), args.task_file.as_deref())?;
    let repo = io::load_repository(&args.repository, PostFormat::from_path(&args.repository), &task)?;
    let queries = io::load_posts(&args.queries, PostFormat::from_path(&args.queries))?;
    let (kept, dedup_report) =
        dedup_repository(&repo, &queries, args.threshold, DedupDenominator::LengthSum)
            .map_err(CliError::from)?;
    io::write_posts_jsonl(&args.out, kept.posts())?;
    if let Some(report_path) = &args.report {
        io::write_dedup_report(report_path, &dedup_report)?;
    }
    println!(
        "kept {} of {} posts ({} removed at threshold {})",
        kept.len(),
        repo.len(),
        dedup_report.discarded.len(),
        args.threshold
    );
    Ok(())
}

fn cmd_keyword_corr(args: KeywordCorrArgs) -> Result<()> {
    let task = io::resolve_task(args.task.as_deref(), args.task_file.as_deref())?;
    let repo = io::load_repository(&args.repository, PostFormat::from_path(&args.repository), &task)?;
    let lexicon = io::load_lexicon(&args.lexicon)?;
    let corr = analyses::keyword_correlation(&repo, &task, &lexicon)?;
    println!(
        "positive: {:.2}% of {}  negative: {:.2}% of {}",
        corr.positive_pct, corr.n_positive, corr.negative_pct, corr.n_negative
    );
    match corr.ratio {
        Some(ratio) => println!("ratio: {ratio:.2}"),
        None => println!("ratio: infinite (no negative post matches)"),
    }
    Ok(())
}

fn cmd_baselines(args: BaselinesArgs) -> Result<()> {
    let task = io::resolve_task(args.task.as_deref(), args.task_file.as_deref())?;
    let repo = io::load_repository(&args.repository, PostFormat::from_path(&args.repository), &task)?;
    let queries = io::load_posts(&args.queries, PostFormat::from_path(&args.queries))?;
    let mut lexicons = Vec::new();
    for path in &args.lexicon {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("lexicon")
            .to_string();
        lexicons.push((name, io::load_lexicon(path)?));
    }
    let report =
        analyses::run_baselines(&repo, &task, &queries, &lexicons, args.vote_k, args.min_token_len)?;
    for result in &report.results {
        let auc = result
            .metrics
            .auc
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<24} f1_macro={:.4} f1_weighted={:.4} auc={}",
            result.name, result.metrics.f1_macro, result.metrics.f1_weighted, auc
        );
    }
    println!("best: {}", report.best);
    if let Some(out) = &args.out {
        io::write_json(out, &report)?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let summary: runner::RunSummary = io::read_json(&args.summary)?;
    print!("{}", report::render_table(&summary, args.reference.as_deref())?);
    if let Some(csv_path) = &args.csv {
        report::write_csv(&summary, csv_path)?;
        println!("csv written to {}", csv_path.display());
    }
    Ok(())
}

fn cmd_term_overlap(args: TermOverlapArgs) -> Result<()> {
    let task = io::resolve_task(args.task.as_deref(), args.task_file.as_deref())?;
    let overlap = analyses::term_overlap_from_file(&args.predictions, &task)?;
    println!(
        "queries: {} ({} with no content terms)",
        overlap.per_query.len(),
        overlap.no_content_terms.len()
    );
    println!(
        "mean same-label overlap: {:.4}  mean opposite-label overlap: {:.4}",
        overlap.mean_same, overlap.mean_opposite
    );
    match overlap.mean_ratio {
        Some(ratio) => println!("mean same/opposite ratio: {ratio:.4}"),
        None => println!("mean same/opposite ratio: undefined (no opposite-label hits)"),
    }
    if let Some(out) = &args.out {
        io::write_json(out, &overlap)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; anything
            // else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Dedup(args) => cmd_dedup(args),
        Command::KeywordCorr(args) => cmd_keyword_corr(args),
        Command::Baselines(args) => cmd_baselines(args),
        Command::Report(args) => cmd_report(args),
        Command::TermOverlap(args) => cmd_term_overlap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
