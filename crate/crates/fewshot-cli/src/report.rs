//! Plain-text and CSV rendering of run summaries.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::runner::{AggregateRow, RunSummary};

fn row_label(row: &AggregateRow) -> String {
    let repo = match row.repo_size {
        Some(n) => format!("repo={n}"),
        None => "repo=full".to_string(),
    };
    let perturbation = serde_json::to_value(row.perturbation)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    format!("{repo} k={} {} {}", row.k, perturbation, row.ablation.label())
}

fn fmt_mean_std(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (None, _) => "-".to_string(),
        (Some(m), None) => format!("{m:.4}"),
        (Some(m), Some(s)) => format!("{m:.4}±{s:.4}"),
    }
}

/// Fixed-width table of aggregate metrics, one row per sweep point.
/// When `reference` names a row, a final column shows each row's AUC as
/// a percent change relative to it.
pub fn render_table(summary: &RunSummary, reference: Option<&str>) -> Result<String> {
    let rows = &summary.aggregates;
    let labels: Vec<String> = rows.iter().map(row_label).collect();
    let reference_auc = match reference {
        None => None,
        Some(name) => {
            let idx = labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| CliError::Usage(format!("no aggregate row named '{name}'")))?;
            match rows[idx].auc_mean {
                Some(auc) if auc != 0.0 => Some(auc),
                _ => return Err(CliError::Data(format!("reference row '{name}' has no usable AUC"))),
            }
        }
    };

    let label_width = labels.iter().map(String::len).max().unwrap_or(4).max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "task: {}  strategy: {:?}  queries: {}  repository: {} ({} removed as near-duplicates)",
        summary.task, summary.strategy, summary.n_queries, summary.n_repository, summary.n_deduped
    );
    let _ = write!(
        out,
        "{:<label_width$}  {:>6}  {:>15}  {:>15}  {:>15}",
        "cell", "seeds", "auc", "f1_macro", "f1_weighted"
    );
    if reference_auc.is_some() {
        let _ = write!(out, "  {:>9}", "auc_rel%");
    }
    out.push('\n');

    for (row, label) in rows.iter().zip(&labels) {
        let _ = write!(
            out,
            "{:<label_width$}  {:>6}  {:>15}  {:>15}  {:>15}",
            label,
            row.n_seeds,
            fmt_mean_std(row.auc_mean, row.auc_std),
            fmt_mean_std(Some(row.f1_macro_mean), row.f1_macro_std),
            fmt_mean_std(Some(row.f1_weighted_mean), row.f1_weighted_std),
        );
        if let Some(reference) = reference_auc {
            let rel = row
                .auc_mean
                .map(|auc| format!("{:+.2}", 100.0 * (auc - reference) / reference))
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(out, "  {rel:>9}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV of the aggregate rows, one line per sweep point.
pub fn write_csv(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(CliError::data)?;
    writer
        .write_record([
            "repo_size",
            "k",
            "perturbation",
            "ablation",
            "n_seeds",
            "auc_mean",
            "auc_std",
            "f1_macro_mean",
            "f1_macro_std",
            "f1_weighted_mean",
            "f1_weighted_std",
        ])
        .map_err(CliError::data)?;
    for row in &summary.aggregates {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let perturbation = serde_json::to_value(row.perturbation)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        writer
            .write_record([
                row.repo_size.map(|n| n.to_string()).unwrap_or_else(|| "full".into()),
                row.k.to_string(),
                perturbation,
                row.ablation.label().to_string(),
                row.n_seeds.to_string(),
                opt(row.auc_mean),
                opt(row.auc_std),
                row.f1_macro_mean.to_string(),
                opt(row.f1_macro_std),
                row.f1_weighted_mean.to_string(),
                opt(row.f1_weighted_std),
            ])
            .map_err(CliError::data)?;
    }
    writer.flush().map_err(CliError::data)?;
    Ok(())
}
