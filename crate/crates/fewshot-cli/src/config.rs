//! Experiment configuration: one TOML file describing the pipeline plus
//! the sweep axes, fingerprinted for the output directory layout.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fewshot_core::prompt::PromptAblation;
use fewshot_core::select::{Perturbation, Strategy};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSection {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    pub repository: PathBuf,
    pub queries: PathBuf,
    /// Dedup the repository against the query set before running.
    #[serde(default = "default_true")]
    pub dedup: bool,
    #[serde(default = "default_threshold")]
    pub dedup_threshold: f64,
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSection {
    #[serde(default = "default_k")]
    pub k: usize,
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    32
}

/// Named ablation variants for the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationName {
    Full,
    NoDefinition,
    NoShotText,
    NoQuery,
    NoShotLabels,
}

impl AblationName {
    pub fn to_ablation(self) -> PromptAblation {
        let full = PromptAblation::default();
        match self {
            AblationName::Full => full,
            AblationName::NoDefinition => PromptAblation { include_definition: false, ..full },
            AblationName::NoShotText => PromptAblation { include_shot_text: false, ..full },
            AblationName::NoQuery => PromptAblation { include_query: false, ..full },
            AblationName::NoShotLabels => PromptAblation { include_shot_labels: false, ..full },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AblationName::Full => "full",
            AblationName::NoDefinition => "no_definition",
            AblationName::NoShotText => "no_shot_text",
            AblationName::NoQuery => "no_query",
            AblationName::NoShotLabels => "no_shot_labels",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SweepSection {
    /// Empty means: use selection.k only.
    #[serde(default)]
    pub k_values: Vec<usize>,
    /// Downsampled repository sizes; a full-repository cell is always run.
    #[serde(default)]
    pub repo_sizes: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    #[serde(default)]
    pub ablations: Vec<AblationName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerBackend {
    Http,
    MockNearestLabel,
    MockKeyword,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerSection {
    pub backend: ScorerBackend,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Lexicon file for the mock_keyword backend.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackend {
    Tfidf,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSection {
    #[serde(default = "default_embedding_backend")]
    pub provider: EmbeddingBackend,
    #[serde(default = "default_true")]
    pub lowercase: bool,
    #[serde(default = "default_min_token_len")]
    pub min_token_len: usize,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub dimension: Option<usize>,
}

fn default_embedding_backend() -> EmbeddingBackend {
    EmbeddingBackend::Tfidf
}

fn default_min_token_len() -> usize {
    2
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            provider: EmbeddingBackend::Tfidf,
            lowercase: true,
            min_token_len: 2,
            endpoint: None,
            model: None,
            dimension: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSection {
    #[serde(default)]
    pub save_prompts: bool,
    #[serde(default)]
    pub skip_failures: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSection,
    pub data: DataSection,
    pub selection: SelectionSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub scorer: ScorerSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&contents)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scorer.backend == ScorerBackend::Http && self.scorer.endpoint.is_none() {
            return Err(CliError::Usage("http scorer backend requires an endpoint".into()));
        }
        if self.scorer.backend == ScorerBackend::MockKeyword && self.scorer.lexicon.is_none() {
            return Err(CliError::Usage("mock_keyword backend requires a lexicon file".into()));
        }
        if self.embedding.provider == EmbeddingBackend::Remote && self.embedding.endpoint.is_none() {
            return Err(CliError::Usage("remote embedding provider requires an endpoint".into()));
        }
        Ok(())
    }

    /// Sweep axes with single-value defaults filled in from the base
    /// sections.
    pub fn axes(&self) -> ResolvedAxes {
        ResolvedAxes {
            k_values: if self.sweep.k_values.is_empty() {
                vec![self.selection.k]
            } else {
                self.sweep.k_values.clone()
            },
            repo_sizes: self.sweep.repo_sizes.clone(),
            seeds: if self.sweep.seeds.is_empty() {
                vec![self.selection.seed]
            } else {
                self.sweep.seeds.clone()
            },
            perturbations: if self.sweep.perturbations.is_empty() {
                vec![Perturbation::None]
            } else {
                self.sweep.perturbations.clone()
            },
            ablations: if self.sweep.ablations.is_empty() {
                vec![AblationName::Full]
            } else {
                self.sweep.ablations.clone()
            },
        }
    }

    /// Hash of the semantic configuration: everything that changes
    /// predictions, excluding output options.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Semantic<'a> {
            task: &'a TaskSection,
            data: &'a DataSection,
            selection: &'a SelectionSection,
            sweep: &'a SweepSection,
            scorer: &'a ScorerSection,
            embedding: &'a EmbeddingSection,
        }
        let canon = serde_json::to_string(&Semantic {
            task: &self.task,
            data: &self.data,
            selection: &self.selection,
            sweep: &self.sweep,
            scorer: &self.scorer,
            embedding: &self.embedding,
        })
        .expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedAxes {
    pub k_values: Vec<usize>,
    pub repo_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub perturbations: Vec<Perturbation>,
    pub ablations: Vec<AblationName>,
}
