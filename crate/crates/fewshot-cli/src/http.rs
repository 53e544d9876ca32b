//! HTTP backends: a completion scorer and an embedding service client.
//!
//! Both retry transient failures with exponential backoff (base 250ms,
//! doubling, plus uniform jitter) up to `max_retries` attempts total.

use std::cell::RefCell;
use std::collections::HashMap;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fewshot_core::embed::{EmbedError, EmbeddingProvider, SparseVector};
use fewshot_core::lm::{ClassScores, LmError, Scorer};
use fewshot_core::prompt::{Prompt, TaskSpec};

const BACKOFF_BASE_MS: u64 = 250;

/// API key resolution: explicit value wins, then the environment.
pub fn resolve_api_key(explicit: Option<&str>, env_var: &str) -> Option<String> {
    explicit.map(str::to_owned).or_else(|| std::env::var(env_var).ok())
}

fn backoff_delay(attempt: u32) -> Duration {
    let base = BACKOFF_BASE_MS.saturating_mul(1u64 << attempt.min(6));
    let jitter = rand::thread_rng().gen_range(0..=base / 2);
    Duration::from_millis(base + jitter)
}

fn is_retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
}

pub struct HttpScorer {
    client: reqwest::blocking::Client,
    config: HttpConfig,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    candidates: &'a [String],
}

#[derive(Deserialize)]
struct ScoreResponse {
    logprobs: Vec<f64>,
}

impl HttpScorer {
    pub fn new(config: HttpConfig) -> Result<Self, LmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LmError::Transport(format!("client: {e}").into()))?;
        Ok(HttpScorer { client, config })
    }

    fn post_with_retries<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, String> {
        let mut last_error = String::new();
        for attempt in 0..self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt - 1));
            }
            let mut request = self.client.post(url).json(body);
            if let Some(key) = &self.config.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status().as_u16();
                    if response.status().is_success() {
                        return response.json::<R>().map_err(|e| format!("decode: {e}"));
                    }
                    last_error = format!("status {status}");
                    if !is_retryable(status) {
                        return Err(last_error);
                    }
                }
                Err(e) => last_error = format!("send: {e}"),
            }
        }
        Err(format!("{last_error} (after {} attempts)", self.config.max_retries))
    }
}

impl Scorer for HttpScorer {
    fn score(&self, prompt: &Prompt, task: &TaskSpec) -> Result<ClassScores, LmError> {
        let candidates = &prompt.answer_candidates;
        let url = format!("{}/score", self.config.endpoint.trim_end_matches('/'));
        let body = ScoreRequest {
            model: &self.config.model,
            prompt: &prompt.text,
            candidates,
        };
        let response: ScoreResponse = self
            .post_with_retries(&url, &body)
            .map_err(|e| LmError::Transport(e.into()))?;
        if response.logprobs.len() != candidates.len() {
            return Err(LmError::Transport(
                format!(
                    "expected {} logprobs, got {}",
                    candidates.len(),
                    response.logprobs.len()
                )
                .into(),
            ));
        }
        ClassScores::from_logprobs(task, &response.logprobs)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    index: usize,
    embedding: Vec<f64>,
}

/// Client for a dense embedding service. Responses are L2-normalized on
/// receipt and cached by text hash so repeated queries are free.
pub struct RemoteEmbeddingProvider {
    scorer: HttpScorer,
    expected_dimension: Option<usize>,
    cache: RefCell<HashMap<[u8; 32], SparseVector>>,
}

impl RemoteEmbeddingProvider {
    pub fn new(config: HttpConfig, expected_dimension: Option<usize>) -> Result<Self, LmError> {
        Ok(RemoteEmbeddingProvider {
            scorer: HttpScorer::new(config)?,
            expected_dimension,
            cache: RefCell::new(HashMap::new()),
        })
    }

    fn text_key(text: &str) -> [u8; 32] {
        Sha256::digest(text.as_bytes()).into()
    }

    /// Embed a batch in one request, filling the cache.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<SparseVector>, EmbedError> {
        let mut out: Vec<Option<SparseVector>> = vec![None; texts.len()];
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.borrow();
            for (i, text) in texts.iter().enumerate() {
                match cache.get(&Self::text_key(text)) {
                    Some(v) => out[i] = Some(v.clone()),
                    None => missing.push(i),
                }
            }
        }
        if !missing.is_empty() {
            let inputs: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let url = format!(
                "{}/embed",
                self.scorer.config.endpoint.trim_end_matches('/')
            );
            let body = EmbedRequest { model: &self.scorer.config.model, input: &inputs };
            let response: EmbedResponse = self
                .scorer
                .post_with_retries(&url, &body)
                .map_err(|e| EmbedError::Provider(e.into()))?;
            if response.data.len() != inputs.len() {
                return Err(EmbedError::Provider(
                    format!("expected {} embeddings, got {}", inputs.len(), response.data.len())
                        .into(),
                ));
            }
            let mut cache = self.cache.borrow_mut();
            for item in response.data {
                if item.index >= inputs.len() {
                    return Err(EmbedError::Provider(
                        format!("embedding index {} out of range", item.index).into(),
                    ));
                }
                if let Some(dim) = self.expected_dimension {
                    if item.embedding.len() != dim {
                        return Err(EmbedError::Provider(
                            format!("expected dimension {dim}, got {}", item.embedding.len())
                                .into(),
                        ));
                    }
                }
                let vector = SparseVector::from_dense(&item.embedding).normalized();
                let slot = missing[item.index];
                cache.insert(Self::text_key(texts[slot]), vector.clone());
                out[slot] = Some(vector);
            }
        }
        out.into_iter()
            .map(|v| v.ok_or_else(|| EmbedError::Provider("missing embedding in response".into())))
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn embed(&self, text: &str) -> Result<SparseVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.pop().expect("one result for one input"))
    }
}
