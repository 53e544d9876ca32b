//! Standalone analyses: keyword/label correlation, lexicon and
//! nearest-neighbor baselines, and shot/query term overlap.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fewshot_core::classify::{
    evaluate, keyword_baseline, shot_term_overlap_report, PredictionRecord, TermOverlapReport,
};
use fewshot_core::corpus::LabeledRepository;
use fewshot_core::embed::{embed_repository, fit_tfidf, EmbeddingProvider, TokenizerConfig};
use fewshot_core::lm::{compile_lexicon, count_lexicon_hits};
use fewshot_core::metrics::MetricsReport;
use fewshot_core::prompt::TaskSpec;

use crate::error::{CliError, Result};
use crate::io;

fn analysis_tokens(text: &str) -> Vec<String> {
    fewshot_core::embed::tokenize(text, &TokenizerConfig { lowercase: true, min_token_len: 1 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeywordCorrelation {
    pub lexicon_size: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Percent of positive-class posts containing at least one term.
    pub positive_pct: f64,
    pub negative_pct: f64,
    /// positive_pct / negative_pct; None when no negative post matches.
    pub ratio: Option<f64>,
}

/// How much more often lexicon terms appear in positive posts than in
/// negative ones.
pub fn keyword_correlation<S: AsRef<str>>(
    repo: &LabeledRepository,
    task: &TaskSpec,
    lexicon: &[S],
) -> Result<KeywordCorrelation> {
    if !task.is_binary() {
        return Err(CliError::Data("keyword correlation requires a binary task".into()));
    }
    if lexicon.is_empty() {
        return Err(CliError::Data("lexicon is empty".into()));
    }
    let compiled = compile_lexicon(lexicon);
    let positive = task.positive_class();
    let (mut n_pos, mut n_neg, mut hit_pos, mut hit_neg) = (0usize, 0usize, 0usize, 0usize);
    for post in repo.posts() {
        let is_pos = post.label.as_deref() == Some(positive);
        let has_hit = count_lexicon_hits(&analysis_tokens(&post.text), &compiled) > 0;
        if is_pos {
            n_pos += 1;
            hit_pos += has_hit as usize;
        } else {
            n_neg += 1;
            hit_neg += has_hit as usize;
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(CliError::Data("both classes must be present for correlation".into()));
    }
    let positive_pct = 100.0 * hit_pos as f64 / n_pos as f64;
    let negative_pct = 100.0 * hit_neg as f64 / n_neg as f64;
    let ratio = (negative_pct > 0.0).then(|| positive_pct / negative_pct);
    Ok(KeywordCorrelation {
        lexicon_size: lexicon.len(),
        n_positive: n_pos,
        n_negative: n_neg,
        positive_pct,
        negative_pct,
        ratio,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineResult {
    pub name: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineReport {
    pub results: Vec<BaselineResult>,
    /// Baseline with the highest macro F1.
    pub best: String,
}

/// Evaluates each lexicon as a hit/no-hit classifier plus a TF-IDF
/// nearest-neighbor vote, all on the same labeled query set.
pub fn run_baselines(
    repo: &LabeledRepository,
    task: &TaskSpec,
    queries: &[fewshot_core::corpus::Post],
    lexicons: &[(String, Vec<String>)],
    vote_k: usize,
    min_token_len: usize,
) -> Result<BaselineReport> {
    if queries.iter().any(|q| q.label.is_none()) {
        return Err(CliError::Data("baseline queries must be labeled".into()));
    }
    let mut results = Vec::new();

    for (name, terms) in lexicons {
        let mut predictions = Vec::with_capacity(queries.len());
        for query in queries {
            predictions.push(keyword_baseline(terms, task, query).map_err(CliError::from)?);
        }
        let gold: Vec<String> = queries.iter().map(|q| q.label.clone().unwrap()).collect();
        let f1 = fewshot_core::metrics::f1_scores(&predictions, &gold, &task.classes)
            .map_err(CliError::from)?;
        results.push(BaselineResult {
            name: format!("lexicon:{name}"),
            metrics: MetricsReport {
                task: task.name.clone(),
                n: queries.len(),
                auc: None,
                f1_binary_pos: task.is_binary().then_some(f1.f1_binary_pos),
                f1_macro: f1.f1_macro,
                f1_weighted: f1.f1_weighted,
                per_class: f1.per_class,
                confusion: f1.confusion,
            },
        });
    }

    let texts: Vec<&str> = repo.posts().iter().map(|p| p.text.as_str()).collect();
    let tokenizer = TokenizerConfig { lowercase: true, min_token_len };
    let model = fit_tfidf(&texts, tokenizer).map_err(CliError::from)?;
    let embeddings = embed_repository(&model, repo).map_err(CliError::from)?;
    let mut records: Vec<PredictionRecord> = Vec::with_capacity(queries.len());
    for query in queries {
        let query_vec = model.embed(&query.text).map_err(CliError::from)?;
        let (predicted, means) =
            fewshot_core::classify::tfidf_vote_baseline(&embeddings, repo, task, &query_vec, vote_k)
                .map_err(CliError::from)?;
        records.push(PredictionRecord {
            query_id: query.id.clone(),
            query_text: query.text.clone(),
            predicted,
            scores: fewshot_core::lm::ClassScores { per_class: means, normalized: false },
            shots: None,
            gold: query.label.clone(),
            prompt_text: None,
        });
    }
    results.push(BaselineResult {
        name: format!("tfidf_vote_k{vote_k}"),
        metrics: evaluate(&records, task).map_err(CliError::from)?,
    });

    let best = results
        .iter()
        .max_by(|a, b| a.metrics.f1_macro.total_cmp(&b.metrics.f1_macro))
        .map(|r| r.name.clone())
        .expect("at least the vote baseline ran");
    Ok(BaselineReport { results, best })
}

/// Term-overlap analysis over a saved predictions file. Requires that
/// the run logged shots (any selection strategy with k > 0).
pub fn term_overlap_from_file(path: &Path, task: &TaskSpec) -> Result<TermOverlapReport> {
    let records = io::read_predictions_jsonl(path)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no prediction records", path.display())));
    }
    shot_term_overlap_report(&records, task).map_err(CliError::from)
}
