//! File formats: JSONL (canonical) and RFC-4180 CSV post records, task
//! spec files, lexicons, and the JSONL experiment logs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use fewshot_core::classify::PredictionRecord;
use fewshot_core::corpus::{DedupReport, LabeledRepository, Post};
use fewshot_core::prompt::{builtin_task, TaskSpec};
use fewshot_core::select::ShotSet;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostFormat {
    Jsonl,
    Csv,
}

impl PostFormat {
    /// Infers the format from the file extension; JSONL is the default.
    pub fn from_path(path: &Path) -> PostFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => PostFormat::Csv,
            _ => PostFormat::Jsonl,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PostRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// Loads posts from a JSONL or CSV file. Labels stay optional here;
/// repository loading validates them against the task.
pub fn load_posts(path: &Path, format: PostFormat) -> Result<Vec<Post>> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut posts = Vec::new();
    match format {
        PostFormat::Jsonl => {
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: PostRecord = serde_json::from_str(&line).map_err(|e| {
                    CliError::Data(format!("{}:{}: malformed record: {e}", path.display(), lineno + 1))
                })?;
                posts.push(Post { id: record.id, text: record.text, label: record.label });
            }
        }
        PostFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            for (rowno, row) in reader.deserialize::<PostRecord>().enumerate() {
                let record = row.map_err(|e| {
                    CliError::Data(format!("{} row {}: malformed record: {e}", path.display(), rowno + 1))
                })?;
                let label = record.label.filter(|l| !l.is_empty());
                posts.push(Post { id: record.id, text: record.text, label });
            }
        }
    }
    Ok(posts)
}

/// Loads and validates a labeled repository.
pub fn load_repository(path: &Path, format: PostFormat, task: &TaskSpec) -> Result<LabeledRepository> {
    let posts = load_posts(path, format)?;
    LabeledRepository::new(task, posts).map_err(CliError::data)
}

pub fn write_posts_jsonl(path: &Path, posts: &[Post]) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for post in posts {
        let record = PostRecord {
            id: post.id.clone(),
            text: post.text.clone(),
            label: post.label.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(CliError::data)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Resolves a task by built-in name or by JSON file path.
pub fn resolve_task(name: Option<&str>, file: Option<&Path>) -> Result<TaskSpec> {
    let task = match (name, file) {
        (_, Some(path)) => {
            let contents = std::fs::read_to_string(path)?;
            serde_json::from_str::<TaskSpec>(&contents)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (Some(name), None) => builtin_task(name)
            .ok_or_else(|| CliError::Usage(format!("unknown built-in task {name:?}")))?,
        (None, None) => return Err(CliError::Usage("a task name or task file is required".into())),
    };
    task.validate().map_err(CliError::data)?;
    Ok(task)
}

/// One term per line; blank lines and "#" comments are skipped.
pub fn load_lexicon(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut terms = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let term = line.trim();
        if term.is_empty() || term.starts_with('#') {
            continue;
        }
        terms.push(term.to_string());
    }
    if terms.is_empty() {
        return Err(CliError::Data(format!("lexicon {} has no terms", path.display())));
    }
    Ok(terms)
}

fn create_file(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(File::create(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(CliError::data)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let contents = std::fs::read_to_string(path)?;
    serde_json::from_str(&contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_dedup_report(path: &Path, report: &DedupReport) -> Result<()> {
    write_json(path, report)
}

pub fn write_predictions_jsonl(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(CliError::data)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions_jsonl(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?);
    }
    Ok(records)
}

/// Shot-log row: one line per query in shots.jsonl.
#[derive(Debug, Serialize, Deserialize)]
pub struct ShotLogRecord {
    pub query_id: String,
    pub strategy: String,
    pub seed: u64,
    pub shots: Vec<ShotLogEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ShotLogEntry {
    pub id: String,
    pub true_label: String,
    pub presented_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

pub fn shot_log_record(shots: &ShotSet, strategy: &str, seed: u64) -> ShotLogRecord {
    ShotLogRecord {
        query_id: shots.query_id.clone(),
        strategy: strategy.to_string(),
        seed,
        shots: shots
            .shots
            .iter()
            .map(|s| ShotLogEntry {
                id: s.post.id.clone(),
                true_label: s.true_label.clone(),
                presented_label: s.presented_label.clone(),
                similarity: s.similarity,
            })
            .collect(),
    }
}

pub fn write_shots_jsonl(path: &Path, records: &[ShotLogRecord]) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(CliError::data)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
