//! End-to-end prediction for a query set, the two non-LM baselines, and
//! the shot term-overlap diagnostic.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledRepository, Post};
use crate::embed::{EmbedError, EmbeddingProvider, RepoEmbeddings, SparseVector};
use crate::lm::{
    compile_lexicon, count_lexicon_hits, predict, ClassScores, LmError, Scorer,
};
use crate::embed::{tokenize, TokenizerConfig};
use crate::prompt::{
    build_few_shot, build_zero_shot, PromptAblation, PromptError, TaskSpec,
};
use crate::select::{
    perturb_labels, select_random, select_random_balanced, select_similarity_balanced,
    select_stratified_balanced, SelectError, SelectionConfig, ShotSet, Strategy,
};
use crate::stopwords::is_stopword;

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    Embed(EmbedError),
    Select(SelectError),
    Prompt(PromptError),
    Lm(LmError),
    EmptyLexicon,
    BinaryOnly,
    ZeroShotRecord { query_id: String },
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::Embed(e) => write!(f, "{e}"),
            ClassifyError::Select(e) => write!(f, "{e}"),
            ClassifyError::Prompt(e) => write!(f, "{e}"),
            ClassifyError::Lm(e) => write!(f, "{e}"),
            ClassifyError::EmptyLexicon => write!(f, "keyword baseline requires a non-empty lexicon"),
            ClassifyError::BinaryOnly => write!(f, "this operation only supports binary tasks"),
            ClassifyError::ZeroShotRecord { query_id } => {
                write!(f, "record for query {query_id} carries no shots")
            }
        }
    }
}

impl From<EmbedError> for ClassifyError {
    fn from(e: EmbedError) -> Self {
        ClassifyError::Embed(e)
    }
}

impl From<SelectError> for ClassifyError {
    fn from(e: SelectError) -> Self {
        ClassifyError::Select(e)
    }
}

impl From<PromptError> for ClassifyError {
    fn from(e: PromptError) -> Self {
        ClassifyError::Prompt(e)
    }
}

impl From<LmError> for ClassifyError {
    fn from(e: LmError) -> Self {
        ClassifyError::Lm(e)
    }
}

/// One query's prediction with full provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: String,
    pub query_text: String,
    pub predicted: String,
    pub scores: ClassScores,
    pub shots: Option<ShotSet>,
    pub gold: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
}

/// What to do when a single query fails mid-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    #[default]
    Abort,
    SkipAndLog,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub task: TaskSpec,
    pub selection: SelectionConfig,
    pub ablation: PromptAblation,
    pub failure_mode: FailureMode,
    pub keep_prompts: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedQuery {
    pub query_id: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<PredictionRecord>,
    pub skipped: Vec<SkippedQuery>,
}

// Mixes the run seed with the query position so random strategies draw
// independent shots per query while staying reproducible.
fn per_query_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn select_shots(
    config: &PipelineConfig,
    repo: &LabeledRepository,
    embeddings: &RepoEmbeddings,
    provider: &dyn EmbeddingProvider,
    query: &Post,
    query_index: usize,
) -> Result<ShotSet, ClassifyError> {
    let sel = &config.selection;
    let classes = &config.task.classes;
    let shots = match sel.strategy {
        Strategy::Random => {
            select_random(repo, &query.id, sel.k, per_query_seed(sel.seed, query_index))?
        }
        Strategy::RandomBalanced => select_random_balanced(
            repo,
            classes,
            &query.id,
            sel.k,
            per_query_seed(sel.seed, query_index),
        )?,
        Strategy::SimilarityBalanced => {
            let qv = provider.embed(&query.text)?;
            select_similarity_balanced(embeddings, repo, classes, &query.id, &qv, sel.k)?
        }
        Strategy::StratifiedBalanced => {
            let qv = provider.embed(&query.text)?;
            select_stratified_balanced(embeddings, repo, classes, &query.id, &qv, sel.k)?
        }
    };
    Ok(perturb_labels(shots, classes, sel.perturbation, per_query_seed(sel.seed, query_index))?)
}

/// Runs embed → select → perturb → prompt → score → predict for each query.
/// With k = 0 the zero-shot prompt is used and the repository is not
/// touched.
pub fn run_pipeline(
    config: &PipelineConfig,
    repo: &LabeledRepository,
    embeddings: &RepoEmbeddings,
    provider: &dyn EmbeddingProvider,
    scorer: &dyn Scorer,
    queries: &[Post],
) -> Result<PipelineOutput, ClassifyError> {
    let mut records = Vec::with_capacity(queries.len());
    let mut skipped = Vec::new();
    for (i, query) in queries.iter().enumerate() {
        match classify_one(config, repo, embeddings, provider, scorer, query, i) {
            Ok(record) => records.push(record),
            Err(e) => match config.failure_mode {
                FailureMode::Abort => return Err(e),
                FailureMode::SkipAndLog => skipped.push(SkippedQuery {
                    query_id: query.id.clone(),
                    error: alloc::format!("{e}"),
                }),
            },
        }
    }
    Ok(PipelineOutput { records, skipped })
}

fn classify_one(
    config: &PipelineConfig,
    repo: &LabeledRepository,
    embeddings: &RepoEmbeddings,
    provider: &dyn EmbeddingProvider,
    scorer: &dyn Scorer,
    query: &Post,
    query_index: usize,
) -> Result<PredictionRecord, ClassifyError> {
    let task = &config.task;
    let (prompt, shots) = if config.selection.k == 0 {
        (build_zero_shot(task, query)?, None)
    } else {
        let shots = select_shots(config, repo, embeddings, provider, query, query_index)?;
        let prompt = build_few_shot(task, &shots, query, &config.ablation)?;
        (prompt, Some(shots))
    };
    let scores = scorer.score(&prompt, task)?;
    let predicted = predict(&scores, task)?;
    Ok(PredictionRecord {
        query_id: query.id.clone(),
        query_text: query.text.clone(),
        predicted,
        scores,
        shots,
        gold: query.label.clone(),
        prompt_text: config.keep_prompts.then(|| prompt.text),
    })
}

fn baseline_tokens(text: &str) -> Vec<String> {
    tokenize(text, &TokenizerConfig { lowercase: true, min_token_len: 1 })
}

/// Keyword baseline: positive iff the post contains at least one lexicon
/// term as a whole-token (sub)sequence, case-insensitive.
pub fn keyword_baseline<S: AsRef<str>>(
    lexicon: &[S],
    task: &TaskSpec,
    query: &Post,
) -> Result<String, ClassifyError> {
    if lexicon.is_empty() {
        return Err(ClassifyError::EmptyLexicon);
    }
    if !task.is_binary() {
        return Err(ClassifyError::BinaryOnly);
    }
    let compiled = compile_lexicon(lexicon);
    let hits = count_lexicon_hits(&baseline_tokens(&query.text), &compiled);
    Ok(if hits > 0 { task.classes[0].clone() } else { task.classes[1].clone() })
}

/// Similarity-vote baseline: select the top k/|C| posts per class and
/// predict the class with the highest mean cosine. The per-class means are
/// returned in class order; the positive one is the AUC ranking score.
pub fn tfidf_vote_baseline(
    embeddings: &RepoEmbeddings,
    repo: &LabeledRepository,
    task: &TaskSpec,
    query_vec: &SparseVector,
    k: usize,
) -> Result<(String, Vec<(String, f64)>), ClassifyError> {
    let shots = select_similarity_balanced(embeddings, repo, &task.classes, "vote", query_vec, k)?;
    let quota = k / task.classes.len();
    let mut means: Vec<(String, f64)> = Vec::with_capacity(task.classes.len());
    for class in &task.classes {
        let total: f64 = shots
            .shots
            .iter()
            .filter(|s| &s.true_label == class)
            .map(|s| s.similarity.expect("similarity selection records scores"))
            .sum();
        means.push((class.clone(), total / quota as f64));
    }
    let mut best = 0;
    for (i, (_, m)) in means.iter().enumerate() {
        if *m > means[best].1 {
            best = i;
        }
    }
    Ok((means[best].0.clone(), means))
}

/// Builds the metrics report for a batch of gold-labeled records. AUC uses
/// the positive-class probability for binary tasks and support-weighted
/// one-vs-rest scores otherwise; it is absent when undefined (single-class
/// gold).
pub fn evaluate(
    records: &[PredictionRecord],
    task: &TaskSpec,
) -> Result<crate::metrics::MetricsReport, crate::metrics::MetricsError> {
    use crate::metrics::{f1_scores, roc_auc_binary, roc_auc_weighted_ovr, MetricsError};

    let gold: Vec<String> = records
        .iter()
        .map(|r| r.gold.clone().ok_or(MetricsError::EmptyInput))
        .collect::<Result<_, _>>()?;
    let predictions: Vec<String> = records.iter().map(|r| r.predicted.clone()).collect();
    let f1 = f1_scores(&predictions, &gold, &task.classes)?;

    let auc = if task.is_binary() {
        let scored: Vec<(f64, bool)> = records
            .iter()
            .zip(&gold)
            .map(|(r, g)| {
                let s = r.scores.positive_score(task).unwrap_or(0.0);
                (s, g == task.positive_class())
            })
            .collect();
        roc_auc_binary(&scored).ok()
    } else {
        let vectors: Vec<Vec<f64>> = records
            .iter()
            .map(|r| task.classes.iter().map(|c| r.scores.score_for(c).unwrap_or(0.0)).collect())
            .collect();
        roc_auc_weighted_ovr(&vectors, &gold, &task.classes).ok()
    };

    Ok(crate::metrics::MetricsReport {
        task: task.name.clone(),
        n: records.len(),
        auc,
        f1_binary_pos: task.is_binary().then_some(f1.f1_binary_pos),
        f1_macro: f1.f1_macro,
        f1_weighted: f1.f1_weighted,
        per_class: f1.per_class,
        confusion: f1.confusion,
    })
}

/// Per-query overlap of query content terms with same- vs opposite-label
/// shots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryOverlap {
    pub query_id: String,
    pub same_label_hits: usize,
    pub opposite_label_hits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermOverlapReport {
    /// Content terms are lowercased alphanumeric tokens minus a bundled
    /// stopword list; no POS filtering or lemmatization.
    pub term_extraction: String,
    pub per_query: Vec<QueryOverlap>,
    /// Query ids with no content terms, excluded from the means.
    pub no_content_terms: Vec<String>,
    pub mean_same: f64,
    pub mean_opposite: f64,
    /// Mean of per-query same/opposite ratios over queries with at least
    /// one opposite-label hit.
    pub mean_ratio: Option<f64>,
}

/// Counts query content terms in same-gold-label vs opposite-label shots.
/// Binary tasks only; zero-shot records are rejected.
pub fn shot_term_overlap_report(
    records: &[PredictionRecord],
    task: &TaskSpec,
) -> Result<TermOverlapReport, ClassifyError> {
    if !task.is_binary() {
        return Err(ClassifyError::BinaryOnly);
    }
    let mut per_query = Vec::new();
    let mut no_content_terms = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    for record in records {
        let shots = record.shots.as_ref().ok_or_else(|| ClassifyError::ZeroShotRecord {
            query_id: record.query_id.clone(),
        })?;
        let Some(gold) = record.gold.as_deref() else { continue };

        let query_terms = content_terms(&record.query_text);
        if query_terms.is_empty() {
            no_content_terms.push(record.query_id.clone());
            continue;
        }
        let mut same = 0usize;
        let mut opposite = 0usize;
        for shot in &shots.shots {
            let shot_tokens = baseline_tokens(&shot.post.text);
            let hits: usize = query_terms
                .iter()
                .map(|t| shot_tokens.iter().filter(|s| *s == t).count())
                .sum();
            if shot.true_label == gold {
                same += hits;
            } else {
                opposite += hits;
            }
        }
        if opposite > 0 {
            ratios.push(same as f64 / opposite as f64);
        }
        per_query.push(QueryOverlap {
            query_id: record.query_id.clone(),
            same_label_hits: same,
            opposite_label_hits: opposite,
        });
    }
    let n = per_query.len().max(1) as f64;
    let mean_same = per_query.iter().map(|q| q.same_label_hits as f64).sum::<f64>() / n;
    let mean_opposite = per_query.iter().map(|q| q.opposite_label_hits as f64).sum::<f64>() / n;
    let mean_ratio = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    Ok(TermOverlapReport {
        term_extraction: "lowercased alphanumeric tokens minus bundled English stopwords".into(),
        per_query,
        no_content_terms,
        mean_same,
        mean_opposite,
        mean_ratio,
    })
}

/// Extracts the content terms the overlap report counts: lowercased
/// alphanumeric tokens with stopwords removed, deduplicated.
pub fn content_terms(text: &str) -> Vec<String> {
    let mut terms: Vec<String> =
        baseline_tokens(text).into_iter().filter(|t| !is_stopword(t)).collect();
    terms.sort();
    terms.dedup();
    terms
}
