//! Answer-candidate scoring: per-class token probabilities for a prompt.
//!
//! The [`Scorer`] trait is the backend seam. This crate ships the two
//! deterministic mocks; the HTTP backend lives in the companion crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::embed::{tokenize, TokenizerConfig};
use crate::prompt::{Prompt, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum LmError {
    TooFewCandidates { got: usize },
    CandidateCountMismatch { expected: usize, got: usize },
    MissingClass { class: String },
    BinaryOnly,
    EmptyLexicon,
    Transport(String),
}

impl fmt::Display for LmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LmError::TooFewCandidates { got } => {
                write!(f, "prompt needs at least 2 answer candidates, got {got}")
            }
            LmError::CandidateCountMismatch { expected, got } => {
                write!(f, "backend returned {got} scores for {expected} candidates")
            }
            LmError::MissingClass { class } => write!(f, "scores missing class {class:?}"),
            LmError::BinaryOnly => write!(f, "this scorer only supports binary tasks"),
            LmError::EmptyLexicon => write!(f, "keyword scorer requires a non-empty lexicon"),
            LmError::Transport(msg) => write!(f, "scoring backend failure: {msg}"),
        }
    }
}

/// Per-class probability-like scores in task class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub per_class: Vec<(String, f64)>,
    pub normalized: bool,
}

impl ClassScores {
    /// Softmax over candidate log-probabilities, aligned with the task's
    /// class order.
    pub fn from_logprobs(task: &TaskSpec, logprobs: &[f64]) -> Result<Self, LmError> {
        if logprobs.len() != task.classes.len() {
            return Err(LmError::CandidateCountMismatch {
                expected: task.classes.len(),
                got: logprobs.len(),
            });
        }
        let max = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logprobs.iter().map(|&lp| libm::exp(lp - max)).collect();
        let total: f64 = exps.iter().sum();
        let per_class = task
            .classes
            .iter()
            .zip(&exps)
            .map(|(c, &e)| (c.clone(), e / total))
            .collect();
        Ok(ClassScores { per_class, normalized: true })
    }

    pub fn score_for(&self, class: &str) -> Option<f64> {
        self.per_class.iter().find(|(c, _)| c == class).map(|&(_, s)| s)
    }

    /// Ranking score for AUC: the positive-class probability.
    pub fn positive_score(&self, task: &TaskSpec) -> Option<f64> {
        self.score_for(task.positive_class())
    }
}

/// Argmax with ties broken by task class order (first listed wins).
pub fn predict(scores: &ClassScores, task: &TaskSpec) -> Result<String, LmError> {
    let mut best: Option<(&str, f64)> = None;
    for class in &task.classes {
        let s = scores
            .score_for(class)
            .ok_or_else(|| LmError::MissingClass { class: class.clone() })?;
        if best.map_or(true, |(_, bs)| s > bs) {
            best = Some((class, s));
        }
    }
    Ok(best.expect("tasks have at least one class").0.into())
}

/// A backend that scores a prompt's answer candidates.
pub trait Scorer {
    fn score(&self, prompt: &Prompt, task: &TaskSpec) -> Result<ClassScores, LmError>;
}

fn check_candidates(prompt: &Prompt) -> Result<(), LmError> {
    if prompt.answer_candidates.len() < 2 {
        return Err(LmError::TooFewCandidates { got: prompt.answer_candidates.len() });
    }
    Ok(())
}

fn mock_tokens(text: &str) -> Vec<String> {
    tokenize(text, &TokenizerConfig { lowercase: true, min_token_len: 1 })
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut ua: Vec<&String> = a.iter().collect();
    ua.sort();
    ua.dedup();
    let mut ub: Vec<&String> = b.iter().collect();
    ub.sort();
    ub.dedup();
    let inter = ua.iter().filter(|t| ub.binary_search(t).is_ok()).count();
    let union = ua.len() + ub.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// An exemplar block recovered from a rendered prompt.
struct ParsedBlock {
    post_text: String,
    answer: String,
}

/// Splits a rendered prompt back into exemplar blocks and the query text.
fn parse_prompt(text: &str) -> (Vec<ParsedBlock>, String) {
    let mut blocks: Vec<&str> = text.split("\n\n").collect();
    let query_block = blocks.pop().unwrap_or("");
    let field = |block: &str, tag: &str| -> String {
        block
            .lines()
            .find_map(|l| l.strip_prefix(tag))
            .map(|rest| rest.strip_prefix(' ').unwrap_or(rest))
            .unwrap_or("")
            .into()
    };
    let parsed = blocks
        .iter()
        .map(|b| ParsedBlock { post_text: field(b, "Post:"), answer: field(b, "Answer:") })
        .collect();
    (parsed, field(query_block, "Post:"))
}

/// Deterministic mock that copies the presented label of the exemplar with
/// the highest token-overlap (Jaccard over lowercased tokens) with the
/// query, assigning it probability 0.9 and spreading 0.1 over the rest.
/// Zero-shot prompts score uniformly.
#[derive(Debug, Clone, Default)]
pub struct MockNearestLabelScorer;

impl Scorer for MockNearestLabelScorer {
    fn score(&self, prompt: &Prompt, task: &TaskSpec) -> Result<ClassScores, LmError> {
        check_candidates(prompt)?;
        let (blocks, query_text) = parse_prompt(&prompt.text);
        let query_tokens = mock_tokens(&query_text);

        let mut best: Option<(f64, &str)> = None;
        for block in &blocks {
            let Some(class) = task.class_for_token(&block.answer) else { continue };
            let sim = jaccard(&mock_tokens(&block.post_text), &query_tokens);
            // ties keep the earliest block
            if best.map_or(true, |(bs, _)| sim > bs) {
                best = Some((sim, class));
            }
        }

        let n = task.classes.len();
        let per_class = match best {
            Some((_, winner)) => task
                .classes
                .iter()
                .map(|c| {
                    let p = if c == winner { 0.9 } else { 0.1 / (n - 1) as f64 };
                    (c.clone(), p)
                })
                .collect(),
            None => task.classes.iter().map(|c| (c.clone(), 1.0 / n as f64)).collect(),
        };
        Ok(ClassScores { per_class, normalized: true })
    }
}

/// Counts occurrences of lexicon terms in a token stream. Multi-word terms
/// match as contiguous token subsequences.
pub fn count_lexicon_hits(tokens: &[String], lexicon: &[Vec<String>]) -> usize {
    let mut hits = 0;
    for term in lexicon {
        if term.is_empty() {
            continue;
        }
        hits += tokens
            .windows(term.len())
            .filter(|w| w.iter().zip(term).all(|(a, b)| a == b))
            .count();
    }
    hits
}

/// Tokenizes lexicon terms for matching.
pub fn compile_lexicon<S: AsRef<str>>(terms: &[S]) -> Vec<Vec<String>> {
    terms.iter().map(|t| mock_tokens(t.as_ref())).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Deterministic mock for binary tasks: p(positive) = sigmoid(hits - 0.5)
/// where hits counts lexicon term occurrences in the query text.
#[derive(Debug, Clone)]
pub struct MockKeywordScorer {
    lexicon: Vec<Vec<String>>,
}

impl MockKeywordScorer {
    pub fn new<S: AsRef<str>>(terms: &[S]) -> Result<Self, LmError> {
        if terms.is_empty() {
            return Err(LmError::EmptyLexicon);
        }
        Ok(MockKeywordScorer { lexicon: compile_lexicon(terms) })
    }
}

impl Scorer for MockKeywordScorer {
    fn score(&self, prompt: &Prompt, task: &TaskSpec) -> Result<ClassScores, LmError> {
        check_candidates(prompt)?;
        if !task.is_binary() {
            return Err(LmError::BinaryOnly);
        }
        let (_, query_text) = parse_prompt(&prompt.text);
        let hits = count_lexicon_hits(&mock_tokens(&query_text), &self.lexicon);
        let p_pos = sigmoid(hits as f64 - 0.5);
        let per_class = alloc::vec![
            (task.classes[0].clone(), p_pos),
            (task.classes[1].clone(), 1.0 - p_pos),
        ];
        Ok(ClassScores { per_class, normalized: true })
    }
}
