//! Labeled repositories: ingestion invariants, near-duplicate removal
//! against an evaluation set, and class-balanced downsampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::prompt::TaskSpec;

/// One labeled text item. Queries are posts without a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
}

impl Post {
    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        Post { id: id.into(), text: text.into(), label: Some(label.into()) }
    }

    pub fn query(id: impl Into<String>, text: impl Into<String>) -> Self {
        Post { id: id.into(), text: text.into(), label: None }
    }
}

/// The support set of labeled posts from which shots are drawn.
/// Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledRepository {
    pub task_name: String,
    posts: Vec<Post>,
    class_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusError {
    EmptyText { id: String },
    MissingLabel { id: String },
    UnknownLabel { id: String, label: String },
    DuplicateId { id: String },
    BothEmpty,
    InvalidThreshold { threshold: f64 },
    TargetTooLarge { target: usize, available: usize },
    NotDivisible { target: usize, classes: usize },
    InsufficientClass { class: String, have: usize, need: usize },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyText { id } => write!(f, "post {id}: text is empty after trimming"),
            CorpusError::MissingLabel { id } => write!(f, "post {id}: repository posts must be labeled"),
            CorpusError::UnknownLabel { id, label } => {
                write!(f, "post {id}: label {label:?} is not in the task's class set")
            }
            CorpusError::DuplicateId { id } => write!(f, "duplicate post id {id}"),
            CorpusError::BothEmpty => write!(f, "dedup ratio is undefined for two empty strings"),
            CorpusError::InvalidThreshold { threshold } => {
                write!(f, "dedup threshold must be in (0,1], got {threshold}")
            }
            CorpusError::TargetTooLarge { target, available } => {
                write!(f, "downsample target {target} exceeds repository size {available}")
            }
            CorpusError::NotDivisible { target, classes } => {
                write!(f, "downsample target {target} is not divisible by {classes} classes")
            }
            CorpusError::InsufficientClass { class, have, need } => {
                write!(f, "class {class:?} has {have} posts, need {need}")
            }
        }
    }
}

impl LabeledRepository {
    /// Builds a repository, validating every label against the task's class
    /// set and rejecting duplicate ids. File order is preserved.
    pub fn new(task: &TaskSpec, posts: Vec<Post>) -> Result<Self, CorpusError> {
        let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        for post in &posts {
            if post.text.trim().is_empty() {
                return Err(CorpusError::EmptyText { id: post.id.clone() });
            }
            let label = post
                .label
                .as_deref()
                .ok_or_else(|| CorpusError::MissingLabel { id: post.id.clone() })?;
            if !task.classes.iter().any(|c| c == label) {
                return Err(CorpusError::UnknownLabel { id: post.id.clone(), label: label.into() });
            }
            if seen.insert(&post.id, ()).is_some() {
                return Err(CorpusError::DuplicateId { id: post.id.clone() });
            }
            *class_counts.entry(label.into()).or_insert(0) += 1;
        }
        Ok(LabeledRepository { task_name: task.name.clone(), posts, class_counts })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn class_counts(&self) -> &BTreeMap<String, usize> {
        &self.class_counts
    }
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };

    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (j, &cl) in long.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = j + 1;
        for (i, &cs) in short.iter().enumerate() {
            let cur = row[i + 1];
            row[i + 1] = if cs == cl {
                prev_diag
            } else {
                1 + prev_diag.min(cur).min(row[i])
            };
            prev_diag = cur;
        }
    }
    *row.last().unwrap()
}

/// Denominator used when normalizing edit distance into a dedup ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupDenominator {
    /// r = 2l / (|q| + |x|): the fraction-of-characters-changed reading.
    #[default]
    LengthSum,
    /// r = 2l / (|q| * |x|): the literal product form.
    LengthProduct,
}

/// Normalized edit distance between a query and a repository post.
/// Character counts are Unicode scalar values.
pub fn dedup_ratio(q: &str, x: &str, denom: DedupDenominator) -> Result<f64, CorpusError> {
    let ql = q.chars().count();
    let xl = x.chars().count();
    if ql + xl == 0 {
        return Err(CorpusError::BothEmpty);
    }
    let l = edit_distance(q, x) as f64;
    let d = match denom {
        DedupDenominator::LengthSum => (ql + xl) as f64,
        DedupDenominator::LengthProduct => (ql * xl) as f64,
    };
    Ok(2.0 * l / d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupRemoval {
    pub id: String,
    pub min_ratio: f64,
    pub matched_eval_id: String,
}

/// Record of repository posts removed for being near-duplicates of
/// evaluation posts. Sorted by post id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupReport {
    pub threshold: f64,
    pub discarded: Vec<DedupRemoval>,
}

impl DedupReport {
    pub fn discarded_ids(&self) -> Vec<&str> {
        self.discarded.iter().map(|d| d.id.as_str()).collect()
    }
}

/// Removes every repository post within `threshold` normalized edit
/// distance of any evaluation post.
pub fn dedup_repository(
    repo: &LabeledRepository,
    eval_posts: &[Post],
    threshold: f64,
    denom: DedupDenominator,
) -> Result<(LabeledRepository, DedupReport), CorpusError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CorpusError::InvalidThreshold { threshold });
    }
    let eval_lens: Vec<usize> = eval_posts.iter().map(|p| p.text.chars().count()).collect();

    let mut kept: Vec<Post> = Vec::new();
    let mut discarded: Vec<DedupRemoval> = Vec::new();
    for post in repo.posts() {
        let xl = post.text.chars().count();
        let mut min_ratio = f64::INFINITY;
        let mut matched: Option<&str> = None;
        for (q, &ql) in eval_posts.iter().zip(&eval_lens) {
            // Length-difference prefilter: l >= ||Q| - |x||, so the ratio
            // cannot fall below the bound implied by lengths alone.
            if denom == DedupDenominator::LengthSum && ql + xl > 0 {
                let bound = 2.0 * (ql.abs_diff(xl)) as f64 / (ql + xl) as f64;
                if bound >= threshold && bound >= min_ratio {
                    continue;
                }
            }
            let r = dedup_ratio(&q.text, &post.text, denom)?;
            if r < min_ratio {
                min_ratio = r;
                matched = Some(&q.id);
            }
        }
        match matched {
            Some(eval_id) if min_ratio < threshold => discarded.push(DedupRemoval {
                id: post.id.clone(),
                min_ratio,
                matched_eval_id: eval_id.into(),
            }),
            _ => kept.push(post.clone()),
        }
    }
    discarded.sort_by(|a, b| a.id.cmp(&b.id));

    let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in &kept {
        *class_counts.entry(p.label.clone().unwrap()).or_insert(0) += 1;
    }
    let cleaned = LabeledRepository { task_name: repo.task_name.clone(), posts: kept, class_counts };
    Ok((cleaned, DedupReport { threshold, discarded }))
}

/// Seeded class-balanced downsampling: exactly `target_size / |C|` posts
/// per class, uniform without replacement, original order preserved.
pub fn downsample(
    repo: &LabeledRepository,
    target_size: usize,
    seed: u64,
) -> Result<LabeledRepository, CorpusError> {
    if target_size > repo.len() {
        return Err(CorpusError::TargetTooLarge { target: target_size, available: repo.len() });
    }
    let n_classes = repo.class_counts.len();
    if n_classes == 0 || target_size % n_classes != 0 {
        return Err(CorpusError::NotDivisible { target: target_size, classes: n_classes });
    }
    let per_class = target_size / n_classes;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = Vec::with_capacity(target_size);
    // Classes visited in sorted order so the rng stream is reproducible.
    for (class, &count) in &repo.class_counts {
        if count < per_class {
            return Err(CorpusError::InsufficientClass {
                class: class.clone(),
                have: count,
                need: per_class,
            });
        }
        let mut members: Vec<usize> = repo
            .posts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label.as_deref() == Some(class))
            .map(|(i, _)| i)
            .collect();
        if members.len() == per_class {
            selected.extend(members);
        } else {
            members.shuffle(&mut rng);
            selected.extend(members.into_iter().take(per_class));
        }
    }
    selected.sort_unstable();

    let posts: Vec<Post> = selected.into_iter().map(|i| repo.posts[i].clone()).collect();
    let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in &posts {
        *class_counts.entry(p.label.clone().unwrap()).or_insert(0) += 1;
    }
    Ok(LabeledRepository { task_name: repo.task_name.clone(), posts, class_counts })
}
