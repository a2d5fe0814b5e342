//! Multi-step fact retrieval, semantic knowledge ranking and knowledge-fusion
//! question answering over open-book science corpora.
//!
//! The pipeline is split into the following stages:
//!
//! - [`corpus`]: fact and question ingestion, tokenization, stopwords.
//! - [`index`]: in-memory BM25 inverted index.
//! - [`retrieval`]: step-1 / step-2 query generation and multi-step retrieval.
//! - [`rankdata`]: relevance dataset construction with negative mining.
//! - [`encoder`]: a small transformer encoder with exact gradients.
//! - [`ranker`]: the sentence-pair relevance classifier used for re-ranking.
//! - [`fusion`]: the knowledge-fusion multiple-choice QA model.
//! - [`eval`]: metrics, ablation grid, facts sweep and pipeline configuration.
//!
//! [`synth`] builds small synthetic corpora and tasks with known answers.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod rankdata;
pub mod ranker;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
