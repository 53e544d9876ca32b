//! Few-shot instruction-based text classification.
//!
//! The crate turns a labeled repository of posts into in-context exemplars
//! for a token-probability classifier: posts are embedded (TF-IDF by
//! default), the closest class-balanced exemplars are selected per query,
//! an instruction prompt is assembled, and a scorer backend returns
//! per-class probabilities. Evaluation metrics (AUC, F1 variants) and the
//! keyword / similarity-vote baselines live here too.
//!
//! The crate is `no_std` + `alloc`; everything IO-related (file formats,
//! HTTP scorers, the CLI) lives in the companion `fewshot-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classify;
pub mod corpus;
pub mod embed;
pub mod lm;
pub mod metrics;
pub mod prompt;
pub mod select;
pub mod stopwords;
