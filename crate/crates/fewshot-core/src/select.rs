//! Exemplar selection: random, class-balanced random, class-balanced
//! similarity, and binning-stratified balanced selection, plus label
//! perturbation for the robustness experiments.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledRepository, Post};
use crate::embed::{cosine, RepoEmbeddings, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    RandomBalanced,
    SimilarityBalanced,
    StratifiedBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    Flip,
    RandomHalf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectError {
    NotEnoughPosts { k: usize, available: usize },
    NotDivisible { k: usize, classes: usize },
    InsufficientClass { class: String, have: usize, need: usize },
    CannotFillBins { selected: usize, k: usize },
    NonBinaryPerturbation,
}

impl fmt::Display for SelectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectError::NotEnoughPosts { k, available } => {
                write!(f, "k={k} exceeds repository size {available}")
            }
            SelectError::NotDivisible { k, classes } => {
                write!(f, "k={k} is not divisible by {classes} classes")
            }
            SelectError::InsufficientClass { class, have, need } => {
                write!(f, "class {class:?} has {have} posts, need {need}")
            }
            SelectError::CannotFillBins { selected, k } => {
                write!(f, "stratified selection assembled only {selected} of {k} balanced shots")
            }
            SelectError::NonBinaryPerturbation => {
                write!(f, "label perturbation is only defined for binary tasks")
            }
        }
    }
}

/// One selected exemplar. `presented_label` may differ from `true_label`
/// under perturbation; `similarity` is absent for random strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Shot {
    pub post: Post,
    pub true_label: String,
    pub presented_label: String,
    pub similarity: Option<f64>,
}

/// The ordered k exemplars chosen for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotSet {
    pub query_id: String,
    pub shots: Vec<Shot>,
}

impl ShotSet {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }
}

fn shot_from_post(post: &Post, similarity: Option<f64>) -> Shot {
    let label = post.label.clone().expect("repository posts are labeled");
    Shot { post: post.clone(), true_label: label.clone(), presented_label: label, similarity }
}

/// Seeded uniform sample without replacement, agnostic to labels.
pub fn select_random(
    repo: &LabeledRepository,
    query_id: &str,
    k: usize,
    seed: u64,
) -> Result<ShotSet, SelectError> {
    if k > repo.len() {
        return Err(SelectError::NotEnoughPosts { k, available: repo.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..repo.len()).collect();
    indices.shuffle(&mut rng);
    let shots = indices
        .into_iter()
        .take(k)
        .map(|i| shot_from_post(&repo.posts()[i], None))
        .collect();
    Ok(ShotSet { query_id: query_id.into(), shots })
}

fn per_class_quota(k: usize, classes: &[String]) -> Result<usize, SelectError> {
    if classes.is_empty() || k % classes.len() != 0 {
        return Err(SelectError::NotDivisible { k, classes: classes.len() });
    }
    Ok(k / classes.len())
}

/// Seeded uniform sample of exactly k/|C| posts per class, in seeded
/// shuffle order.
pub fn select_random_balanced(
    repo: &LabeledRepository,
    classes: &[String],
    query_id: &str,
    k: usize,
    seed: u64,
) -> Result<ShotSet, SelectError> {
    let quota = per_class_quota(k, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shots: Vec<Shot> = Vec::with_capacity(k);
    for class in classes {
        let members: Vec<&Post> = repo
            .posts()
            .iter()
            .filter(|p| p.label.as_deref() == Some(class.as_str()))
            .collect();
        if members.len() < quota {
            return Err(SelectError::InsufficientClass {
                class: class.clone(),
                have: members.len(),
                need: quota,
            });
        }
        let mut indices: Vec<usize> = (0..members.len()).collect();
        indices.shuffle(&mut rng);
        shots.extend(indices.into_iter().take(quota).map(|i| shot_from_post(members[i], None)));
    }
    shots.shuffle(&mut rng);
    Ok(ShotSet { query_id: query_id.into(), shots })
}

/// Cosine similarity of every repository post to the query.
fn similarities(embeddings: &RepoEmbeddings, query_vec: &SparseVector) -> Vec<f64> {
    embeddings.vectors.iter().map(|v| cosine(v, query_vec)).collect()
}

/// Indices of one class, sorted by descending similarity with ascending
/// post id breaking ties.
fn class_ranked(embeddings: &RepoEmbeddings, sims: &[f64], class: &str) -> Vec<usize> {
    let mut members: Vec<usize> = (0..embeddings.len())
        .filter(|&i| embeddings.labels[i] == class)
        .collect();
    members.sort_by(|&a, &b| {
        sims[b].partial_cmp(&sims[a]).unwrap().then_with(|| embeddings.ids[a].cmp(&embeddings.ids[b]))
    });
    members
}

/// Interleaves per-class picks (each descending by similarity) into the
/// prompt order: ascending similarity, classes alternating, so the most
/// similar exemplars sit nearest the query.
fn interleave_ascending(per_class: Vec<Vec<Shot>>) -> Vec<Shot> {
    let quota = per_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for rank in (0..quota).rev() {
        for class_shots in &per_class {
            if rank < class_shots.len() {
                out.push(class_shots[rank].clone());
            }
        }
    }
    out
}

/// For each class, the k/|C| posts with the highest cosine to the query.
pub fn select_similarity_balanced(
    embeddings: &RepoEmbeddings,
    repo: &LabeledRepository,
    classes: &[String],
    query_id: &str,
    query_vec: &SparseVector,
    k: usize,
) -> Result<ShotSet, SelectError> {
    let quota = per_class_quota(k, classes)?;
    let sims = similarities(embeddings, query_vec);
    let mut per_class: Vec<Vec<Shot>> = Vec::with_capacity(classes.len());
    for class in classes {
        let ranked = class_ranked(embeddings, &sims, class);
        if ranked.len() < quota {
            return Err(SelectError::InsufficientClass {
                class: class.clone(),
                have: ranked.len(),
                need: quota,
            });
        }
        per_class.push(
            ranked[..quota]
                .iter()
                .map(|&i| shot_from_post(&repo.posts()[i], Some(sims[i])))
                .collect(),
        );
    }
    Ok(ShotSet { query_id: query_id.into(), shots: interleave_ascending(per_class) })
}

/// Number of histogram bins: the larger of the Sturges and
/// Freedman-Diaconis estimates, with FD falling back to Sturges when the
/// IQR is zero.
pub fn auto_bin_count(scores: &[f64]) -> usize {
    let n = scores.len();
    if n < 2 {
        return 1;
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let range = sorted[n - 1] - sorted[0];
    if range <= 0.0 {
        return 1;
    }
    let sturges = libm::ceil(libm::log2(n as f64)) as usize + 1;
    let iqr = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    if iqr <= 0.0 {
        return sturges;
    }
    let width = 2.0 * iqr / libm::cbrt(n as f64);
    let fd = libm::ceil(range / width) as usize;
    sturges.max(fd).max(1)
}

/// Linear-interpolation percentile over a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Binning-stratified balanced selection:
/// 1. rank all posts by cosine to the query;
/// 2. bin the scores into max(Sturges, Freedman-Diaconis) equal-width bins;
/// 3. from the highest bin downward, take the largest class-balanced draw
///    available in the bin;
/// 4. repeat passes until k shots are selected.
pub fn select_stratified_balanced(
    embeddings: &RepoEmbeddings,
    repo: &LabeledRepository,
    classes: &[String],
    query_id: &str,
    query_vec: &SparseVector,
    k: usize,
) -> Result<ShotSet, SelectError> {
    let quota = per_class_quota(k, classes)?;
    let sims = similarities(embeddings, query_vec);

    let n_bins = auto_bin_count(&sims);
    let (lo, hi) = sims
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let bin_of = |s: f64| -> usize {
        let raw = libm::floor((s - lo) / width) as usize;
        raw.min(n_bins - 1)
    };

    // per class: ranked candidate queue split by bin
    let mut queues: Vec<Vec<Vec<usize>>> = Vec::with_capacity(classes.len());
    for class in classes {
        let ranked = class_ranked(embeddings, &sims, class);
        if ranked.len() < quota {
            return Err(SelectError::InsufficientClass {
                class: class.clone(),
                have: ranked.len(),
                need: quota,
            });
        }
        let mut bins: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_bins];
        for idx in ranked {
            bins[bin_of(sims[idx])].push(idx);
        }
        queues.push(bins);
    }

    let mut taken: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes.len()];
    let mut remaining = quota * classes.len();
    while remaining > 0 {
        let mut progressed = false;
        for bin in (0..n_bins).rev() {
            let need: Vec<usize> = taken.iter().map(|t| quota - t.len()).collect();
            if need.iter().all(|&n| n == 0) {
                break;
            }
            // the largest balanced draw this bin supports
            let draw = queues
                .iter()
                .zip(&need)
                .map(|(bins, &nd)| bins[bin].len().min(nd))
                .min()
                .unwrap_or(0);
            if draw == 0 {
                continue;
            }
            for (c, bins) in queues.iter_mut().enumerate() {
                let picked: Vec<usize> = bins[bin].drain(..draw).collect();
                taken[c].extend(picked);
            }
            remaining -= draw * classes.len();
            progressed = true;
        }
        if !progressed {
            return Err(SelectError::CannotFillBins { selected: k - remaining, k });
        }
    }

    let per_class: Vec<Vec<Shot>> = taken
        .into_iter()
        .map(|idxs| idxs.into_iter().map(|i| shot_from_post(&repo.posts()[i], Some(sims[i]))).collect())
        .collect();
    Ok(ShotSet { query_id: query_id.into(), shots: interleave_ascending(per_class) })
}

/// Flips presented labels on a binary task: all of them (`Flip`) or a
/// seeded half, ⌊k/2⌋ shots (`RandomHalf`). True labels are retained.
pub fn perturb_labels(
    mut shots: ShotSet,
    classes: &[String],
    mode: Perturbation,
    seed: u64,
) -> Result<ShotSet, SelectError> {
    if mode == Perturbation::None {
        return Ok(shots);
    }
    if classes.len() != 2 {
        return Err(SelectError::NonBinaryPerturbation);
    }
    let other = |label: &str| -> String {
        if label == classes[0] { classes[1].clone() } else { classes[0].clone() }
    };
    match mode {
        Perturbation::None => unreachable!(),
        Perturbation::Flip => {
            for shot in &mut shots.shots {
                shot.presented_label = other(&shot.presented_label);
            }
        }
        Perturbation::RandomHalf => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut indices: Vec<usize> = (0..shots.shots.len()).collect();
            indices.shuffle(&mut rng);
            for &i in indices.iter().take(shots.shots.len() / 2) {
                let s = &mut shots.shots[i];
                s.presented_label = other(&s.presented_label);
            }
        }
    }
    Ok(shots)
}
