//! Embedding of posts and queries into a common vector space.
//!
//! TF-IDF with smoothed IDF and L2 normalization is the default provider;
//! dense providers (e.g. a remote sentence encoder) plug in through
//! [`EmbeddingProvider`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledRepository;

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedError {
    EmptyCorpus,
    Provider(String),
}

impl fmt::Display for EmbedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedError::EmptyCorpus => write!(f, "cannot fit TF-IDF on an empty corpus"),
            EmbedError::Provider(msg) => write!(f, "embedding provider failure: {msg}"),
        }
    }
}

/// Lowercasing plus a minimum token length. Tokens are maximal runs of
/// alphanumeric characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub min_token_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true, min_token_len: 2 }
    }
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if config.lowercase {
                current.extend(ch.to_lowercase());
            } else {
                current.push(ch);
            }
        } else if !current.is_empty() {
            if current.chars().count() >= config.min_token_len {
                tokens.push(core::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.chars().count() >= config.min_token_len {
        tokens.push(current);
    }
    tokens
}

/// Sparse vector with strictly increasing term indices and a cached L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    norm: f64,
}

impl SparseVector {
    /// Builds from unsorted (index, weight) pairs; duplicate indices are
    /// summed and zero weights dropped.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => merged.push((i, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        let norm = libm::sqrt(merged.iter().map(|&(_, w)| w * w).sum::<f64>());
        SparseVector { entries: merged, norm }
    }

    /// Dense constructor for external providers.
    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_entries(values.iter().enumerate().map(|(i, &v)| (i, v)).collect())
    }

    pub fn zero() -> Self {
        SparseVector { entries: Vec::new(), norm: 0.0 }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scales weights so the norm is 1; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        if self.norm > 0.0 {
            for (_, w) in &mut self.entries {
                *w /= self.norm;
            }
            self.norm = 1.0;
        }
        self
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, wa) = self.entries[i];
            let (b, wb) = other.entries[j];
            match a.cmp(&b) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    sum += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// dot(u,v) / (‖u‖‖v‖); 0.0 when either vector is zero.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    if u.norm == 0.0 || v.norm == 0.0 {
        return 0.0;
    }
    u.dot(v) / (u.norm * v.norm)
}

/// Fitted TF-IDF vocabulary and document frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    n_docs: usize,
    tokenizer: TokenizerConfig,
}

/// Fits vocabulary and document frequencies over a corpus. Frequencies
/// count each term at most once per document.
pub fn fit_tfidf<S: AsRef<str>>(corpus: &[S], config: TokenizerConfig) -> Result<TfidfModel, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut vocabulary: BTreeMap<String, usize> = BTreeMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in corpus {
        let mut seen: Vec<usize> = Vec::new();
        for token in tokenize(doc.as_ref(), &config) {
            let next = vocabulary.len();
            let idx = *vocabulary.entry(token).or_insert(next);
            if idx == df.len() {
                df.push(0);
            }
            if !seen.contains(&idx) {
                seen.push(idx);
                df[idx] += 1;
            }
        }
    }
    Ok(TfidfModel { vocabulary, document_frequency: df, n_docs: corpus.len(), tokenizer: config })
}

impl TfidfModel {
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn document_frequency(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).map(|&i| self.document_frequency[i])
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn idf(&self, term_index: usize) -> f64 {
        let df = self.document_frequency[term_index] as f64;
        libm::log((1.0 + self.n_docs as f64) / (1.0 + df)) + 1.0
    }

    /// tf·idf weights with smoothed IDF, L2-normalized. Out-of-vocabulary
    /// tokens contribute nothing; an all-OOV text maps to the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokenize(text, &self.tokenizer) {
            if let Some(&idx) = self.vocabulary.get(&token) {
                *counts.entry(idx).or_insert(0) += 1;
            }
        }
        let entries: Vec<(usize, f64)> =
            counts.into_iter().map(|(idx, tf)| (idx, tf as f64 * self.idf(idx))).collect();
        SparseVector::from_entries(entries).normalized()
    }
}

/// Anything that maps text into the shared vector space. Providers must be
/// deterministic within a run.
pub trait EmbeddingProvider {
    fn embed(&self, text: &str) -> Result<SparseVector, EmbedError>;
}

impl EmbeddingProvider for TfidfModel {
    fn embed(&self, text: &str) -> Result<SparseVector, EmbedError> {
        Ok(self.transform(text))
    }
}

/// One embedding per repository post, aligned with ids and labels.
#[derive(Debug, Clone)]
pub struct RepoEmbeddings {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub vectors: Vec<SparseVector>,
}

impl RepoEmbeddings {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn embed_repository(
    provider: &dyn EmbeddingProvider,
    repo: &LabeledRepository,
) -> Result<RepoEmbeddings, EmbedError> {
    let mut ids = Vec::with_capacity(repo.len());
    let mut labels = Vec::with_capacity(repo.len());
    let mut vectors = Vec::with_capacity(repo.len());
    for post in repo.posts() {
        ids.push(post.id.clone());
        labels.push(post.label.clone().expect("repository posts are labeled"));
        vectors.push(provider.embed(&post.text)?);
    }
    Ok(RepoEmbeddings { ids, labels, vectors })
}
