//! Evaluation metrics: Mann-Whitney AUC, per-class precision/recall/F1
//! with macro and support-weighted averages, and class-balance reporting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Post;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    SingleClassGold,
    LengthMismatch { predictions: usize, gold: usize },
    EmptyInput,
    UnknownLabel { label: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::SingleClassGold => {
                write!(f, "AUC is undefined when gold labels cover a single class")
            }
            MetricsError::LengthMismatch { predictions, gold } => {
                write!(f, "{predictions} predictions for {gold} gold labels")
            }
            MetricsError::EmptyInput => write!(f, "metrics require a non-empty input"),
            MetricsError::UnknownLabel { label } => write!(f, "label {label:?} not in class set"),
        }
    }
}

/// Mann-Whitney AUC: over all positive/negative pairs, the fraction where
/// the positive outscores the negative, ties counting one half.
///
/// Computed from ranks in O(n log n); the pair-enumeration oracle lives in
/// the tests.
pub fn roc_auc_binary(scored: &[(f64, bool)]) -> Result<f64, MetricsError> {
    let n_pos = scored.iter().filter(|&&(_, pos)| pos).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClassGold);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap());

    // midranks for tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if scored[idx].1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One-vs-rest AUC averaged with gold-support weights. Classes absent from
/// gold, or covering all of it, are skipped and their weight excluded.
pub fn roc_auc_weighted_ovr(
    score_vectors: &[Vec<f64>],
    gold: &[String],
    classes: &[String],
) -> Result<f64, MetricsError> {
    if score_vectors.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { predictions: score_vectors.len(), gold: gold.len() });
    }
    if gold.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for (ci, class) in classes.iter().enumerate() {
        let support = gold.iter().filter(|g| *g == class).count();
        if support == 0 || support == gold.len() {
            continue;
        }
        let scored: Vec<(f64, bool)> = score_vectors
            .iter()
            .zip(gold)
            .map(|(scores, g)| (scores[ci], g == class))
            .collect();
        weighted += support as f64 * roc_auc_binary(&scored)?;
        total_weight += support as f64;
    }
    if total_weight == 0.0 {
        return Err(MetricsError::SingleClassGold);
    }
    Ok(weighted / total_weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassScores {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// F1 family computed from the confusion matrix with the 0/0 → 0
/// convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    /// F1 of the first-listed (positive) class; meaningful for binary tasks.
    pub f1_binary_pos: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub per_class: Vec<PerClassScores>,
    /// confusion[gold][predicted], rows and columns in class order.
    pub confusion: Vec<Vec<usize>>,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn f1_scores(
    predictions: &[String],
    gold: &[String],
    classes: &[String],
) -> Result<F1Report, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let index: BTreeMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let n = classes.len();
    let mut confusion = alloc::vec![alloc::vec![0usize; n]; n];
    for (p, g) in predictions.iter().zip(gold) {
        let pi = *index.get(p.as_str()).ok_or_else(|| MetricsError::UnknownLabel { label: p.clone() })?;
        let gi = *index.get(g.as_str()).ok_or_else(|| MetricsError::UnknownLabel { label: g.clone() })?;
        confusion[gi][pi] += 1;
    }

    let mut per_class = Vec::with_capacity(n);
    let total = gold.len() as f64;
    let mut f1_macro = 0.0;
    let mut f1_weighted = 0.0;
    for (ci, class) in classes.iter().enumerate() {
        let tp = confusion[ci][ci] as f64;
        let predicted: f64 = (0..n).map(|g| confusion[g][ci]).sum::<usize>() as f64;
        let support_count: usize = confusion[ci].iter().sum();
        let support = support_count as f64;
        let precision = safe_div(tp, predicted);
        let recall = safe_div(tp, support);
        let f1 = safe_div(2.0 * precision * recall, precision + recall);
        f1_macro += f1 / n as f64;
        f1_weighted += f1 * support / total;
        per_class.push(PerClassScores {
            class: class.clone(),
            precision,
            recall,
            f1,
            support: support_count,
        });
    }
    Ok(F1Report {
        f1_binary_pos: per_class[0].f1,
        f1_macro,
        f1_weighted,
        per_class,
        confusion,
    })
}

/// Per-class fraction of a labeled set.
pub fn class_balance_report(
    posts: &[Post],
    classes: &[String],
) -> Result<Vec<(String, f64)>, MetricsError> {
    if posts.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total = posts.len() as f64;
    Ok(classes
        .iter()
        .map(|c| {
            let count = posts.iter().filter(|p| p.label.as_deref() == Some(c.as_str())).count();
            (c.clone(), count as f64 / total)
        })
        .collect())
}

/// Full evaluation summary for one run cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub n: usize,
    pub auc: Option<f64>,
    pub f1_binary_pos: Option<f64>,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub per_class: Vec<PerClassScores>,
    pub confusion: Vec<Vec<usize>>,
}
