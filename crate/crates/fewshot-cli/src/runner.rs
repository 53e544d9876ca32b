//! Experiment execution: expands the sweep grid into cells, runs each
//! cell, and writes results under `runs/<fingerprint>/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fewshot_core::classify::{evaluate, run_pipeline, FailureMode, PipelineConfig};
use fewshot_core::corpus::{dedup_repository, downsample, DedupDenominator, LabeledRepository, Post};
use fewshot_core::embed::{embed_repository, fit_tfidf, EmbeddingProvider, TokenizerConfig};
use fewshot_core::lm::{MockKeywordScorer, MockNearestLabelScorer, Scorer};
use fewshot_core::metrics::MetricsReport;
use fewshot_core::prompt::TaskSpec;
use fewshot_core::select::{Perturbation, SelectionConfig, Strategy};

use crate::config::{
    AblationName, EmbeddingBackend, ExperimentConfig, ScorerBackend,
};
use crate::error::{CliError, Result};
use crate::http::{HttpConfig, HttpScorer, RemoteEmbeddingProvider};
use crate::io;

/// One point in the sweep grid. `repo_size: None` means the full
/// (deduplicated) repository.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub repo_size: Option<usize>,
    pub seed: u64,
    pub k: usize,
    pub perturbation: Perturbation,
    pub ablation: AblationName,
}

impl Cell {
    pub fn id(&self) -> String {
        let repo = match self.repo_size {
            Some(n) => format!("repo{n}"),
            None => "repofull".to_string(),
        };
        format!(
            "{repo}_seed{}_k{}_{}_{}",
            self.seed,
            self.k,
            perturbation_label(self.perturbation),
            self.ablation.label()
        )
    }
}

fn perturbation_label(p: Perturbation) -> &'static str {
    match p {
        Perturbation::None => "none",
        Perturbation::Flip => "flip",
        Perturbation::RandomHalf => "random_half",
    }
}

/// Every cell the config asks for. Downsampled sizes sweep all seeds;
/// the full-repository cells use only the first seed when sizes are
/// present, since without downsampling extra seeds only matter for
/// random strategies.
pub fn expand_grid(config: &ExperimentConfig) -> Vec<Cell> {
    let axes = config.axes();
    let random_strategy = matches!(
        config.selection.strategy,
        Strategy::Random | Strategy::RandomBalanced
    );
    let mut sizes: Vec<Option<usize>> = axes.repo_sizes.iter().map(|&n| Some(n)).collect();
    sizes.push(None);

    let mut cells = Vec::new();
    for &repo_size in &sizes {
        let seeds: &[u64] = if repo_size.is_none() && !axes.repo_sizes.is_empty() && !random_strategy
        {
            &axes.seeds[..1]
        } else {
            &axes.seeds
        };
        for &seed in seeds {
            for &k in &axes.k_values {
                for &perturbation in &axes.perturbations {
                    for &ablation in &axes.ablations {
                        cells.push(Cell { repo_size, seed, k, perturbation, ablation });
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub cell_id: String,
    pub n_repo: usize,
    pub n_skipped: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub repo_size: Option<usize>,
    pub k: usize,
    pub perturbation: Perturbation,
    pub ablation: AblationName,
    pub n_seeds: usize,
    pub auc_mean: Option<f64>,
    /// Sample standard deviation; absent with fewer than two seeds.
    pub auc_std: Option<f64>,
    pub f1_macro_mean: f64,
    pub f1_macro_std: Option<f64>,
    pub f1_weighted_mean: f64,
    pub f1_weighted_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub task: String,
    pub strategy: Strategy,
    pub n_queries: usize,
    pub n_repository: usize,
    pub n_deduped: usize,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
}

pub fn mean_and_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(var.sqrt()))
}

fn aggregate(cells: &[CellResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Option<usize>, usize, String, String), Vec<&CellResult>> =
        BTreeMap::new();
    for cell in cells {
        groups
            .entry((
                cell.cell.repo_size,
                cell.cell.k,
                perturbation_label(cell.cell.perturbation).to_string(),
                cell.cell.ablation.label().to_string(),
            ))
            .or_default()
            .push(cell);
    }
    groups
        .into_values()
        .map(|group| {
            let first = group[0];
            let aucs: Vec<f64> = group.iter().filter_map(|c| c.metrics.auc).collect();
            let (auc_mean, auc_std) = if aucs.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_std(&aucs);
                (Some(m), s)
            };
            let macros: Vec<f64> = group.iter().map(|c| c.metrics.f1_macro).collect();
            let weighted: Vec<f64> = group.iter().map(|c| c.metrics.f1_weighted).collect();
            let (f1_macro_mean, f1_macro_std) = mean_and_std(&macros);
            let (f1_weighted_mean, f1_weighted_std) = mean_and_std(&weighted);
            AggregateRow {
                repo_size: first.cell.repo_size,
                k: first.cell.k,
                perturbation: first.cell.perturbation,
                ablation: first.cell.ablation,
                n_seeds: group.len(),
                auc_mean,
                auc_std,
                f1_macro_mean,
                f1_macro_std,
                f1_weighted_mean,
                f1_weighted_std,
            }
        })
        .collect()
}

fn build_scorer(config: &ExperimentConfig) -> Result<Box<dyn Scorer>> {
    match config.scorer.backend {
        ScorerBackend::MockNearestLabel => Ok(Box::new(MockNearestLabelScorer)),
        ScorerBackend::MockKeyword => {
            let path = config.scorer.lexicon.as_ref().expect("validated");
            let terms = io::load_lexicon(path)?;
            Ok(Box::new(MockKeywordScorer::new(&terms).map_err(CliError::from)?))
        }
        ScorerBackend::Http => {
            let http = HttpScorer::new(http_config(
                config.scorer.endpoint.as_deref().expect("validated"),
                config.scorer.model.as_deref(),
                config.scorer.timeout_ms,
                config.scorer.max_retries,
            ))
            .map_err(|e| CliError::Backend(e.to_string()))?;
            Ok(Box::new(http))
        }
    }
}

fn http_config(endpoint: &str, model: Option<&str>, timeout_ms: u64, max_retries: u32) -> HttpConfig {
    HttpConfig {
        endpoint: endpoint.to_string(),
        model: model.unwrap_or("default").to_string(),
        api_key: crate::http::resolve_api_key(None, "FEWSHOT_API_KEY"),
        timeout: std::time::Duration::from_millis(timeout_ms),
        max_retries,
    }
}

fn fit_cell_provider(
    config: &ExperimentConfig,
    repo: &LabeledRepository,
) -> Result<Box<dyn EmbeddingProvider>> {
    match config.embedding.provider {
        EmbeddingBackend::Tfidf => {
            let texts: Vec<&str> = repo.posts().iter().map(|p| p.text.as_str()).collect();
            let tokenizer = TokenizerConfig {
                lowercase: config.embedding.lowercase,
                min_token_len: config.embedding.min_token_len,
            };
            let model = fit_tfidf(&texts, tokenizer).map_err(CliError::from)?;
            Ok(Box::new(model))
        }
        EmbeddingBackend::Remote => {
            let provider = RemoteEmbeddingProvider::new(
                http_config(
                    config.embedding.endpoint.as_deref().expect("validated"),
                    config.embedding.model.as_deref(),
                    config.scorer.timeout_ms,
                    config.scorer.max_retries,
                ),
                config.embedding.dimension,
            )
            .map_err(|e| CliError::Backend(e.to_string()))?;
            Ok(Box::new(provider))
        }
    }
}

pub struct RunInputs {
    pub task: TaskSpec,
    pub repository: LabeledRepository,
    pub queries: Vec<Post>,
    pub n_deduped: usize,
}

pub fn load_inputs(config: &ExperimentConfig) -> Result<RunInputs> {
    let task = io::resolve_task(
        config.task.name.as_deref(),
        config.task.file.as_deref(),
    )?;
    let repo_path = &config.data.repository;
    let repository = io::load_repository(
        repo_path,
        io::PostFormat::from_path(repo_path),
        &task,
    )?;
    let queries = io::load_posts(
        &config.data.queries,
        io::PostFormat::from_path(&config.data.queries),
    )?;
    if queries.is_empty() {
        return Err(CliError::Data("query set is empty".into()));
    }

    let (repository, n_deduped) = if config.data.dedup {
        let (kept, report) = dedup_repository(
            &repository,
            &queries,
            config.data.dedup_threshold,
            DedupDenominator::LengthSum,
        )
        .map_err(CliError::from)?;
        (kept, report.discarded.len())
    } else {
        (repository, 0)
    };
    Ok(RunInputs { task, repository, queries, n_deduped })
}

/// Runs the whole sweep and writes everything under
/// `<out_root>/runs/<fingerprint>/`. Returns the summary and its path.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path) -> Result<(RunSummary, PathBuf)> {
    let inputs = load_inputs(config)?;
    let scorer = build_scorer(config)?;
    let fingerprint = config.fingerprint();
    let run_dir = out_root.join("runs").join(&fingerprint);

    let mut results = Vec::new();
    for cell in expand_grid(config) {
        let result = run_cell(config, &inputs, scorer.as_ref(), &cell, &run_dir)?;
        results.push(result);
    }

    let aggregates = aggregate(&results);
    let summary = RunSummary {
        fingerprint: fingerprint.clone(),
        task: inputs.task.name.clone(),
        strategy: config.selection.strategy,
        n_queries: inputs.queries.len(),
        n_repository: inputs.repository.len(),
        n_deduped: inputs.n_deduped,
        cells: results,
        aggregates,
    };
    let summary_path = run_dir.join("summary.json");
    io::write_json(&summary_path, &summary)?;
    Ok((summary, summary_path))
}

fn run_cell(
    config: &ExperimentConfig,
    inputs: &RunInputs,
    scorer: &dyn Scorer,
    cell: &Cell,
    run_dir: &Path,
) -> Result<CellResult> {
    let repo = match cell.repo_size {
        Some(size) => downsample(&inputs.repository, size, cell.seed).map_err(CliError::from)?,
        None => inputs.repository.clone(),
    };
    // The vocabulary must come from the cell's own repository, so refit
    // after downsampling rather than reusing full-corpus statistics.
    let provider = fit_cell_provider(config, &repo)?;
    let embeddings = embed_repository(provider.as_ref(), &repo)
        .map_err(CliError::from)?;

    let pipeline = PipelineConfig {
        task: inputs.task.clone(),
        selection: SelectionConfig {
            k: cell.k,
            strategy: config.selection.strategy,
            seed: cell.seed,
            perturbation: cell.perturbation,
        },
        ablation: cell.ablation.to_ablation(),
        failure_mode: if config.output.skip_failures {
            FailureMode::SkipAndLog
        } else {
            FailureMode::Abort
        },
        keep_prompts: config.output.save_prompts,
    };
    let output = run_pipeline(&pipeline, &repo, &embeddings, provider.as_ref(), scorer, &inputs.queries)
        .map_err(CliError::from)?;

    let metrics = evaluate(&output.records, &inputs.task).map_err(CliError::from)?;

    let cell_id = cell.id();
    let cell_dir = run_dir.join("cells").join(&cell_id);
    io::write_predictions_jsonl(&cell_dir.join("predictions.jsonl"), &output.records)?;
    let strategy_name = serde_json::to_value(config.selection.strategy)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let shot_logs: Vec<_> = output
        .records
        .iter()
        .filter_map(|r| r.shots.as_ref())
        .map(|s| io::shot_log_record(s, &strategy_name, cell.seed))
        .collect();
    io::write_shots_jsonl(&cell_dir.join("shots.jsonl"), &shot_logs)?;
    io::write_json(&cell_dir.join("metrics.json"), &metrics)?;
    if !output.skipped.is_empty() {
        io::write_json(&cell_dir.join("skipped.json"), &output.skipped)?;
    }

    Ok(CellResult {
        cell: cell.clone(),
        cell_id,
        n_repo: repo.len(),
        n_skipped: output.skipped.len(),
        metrics,
    })
}
