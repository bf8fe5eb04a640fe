//! Ingestion, toxicity scoring and windowed analytics for moderating
//! threaded discussions.
//!
//! The pipeline is: build [`model::Corpus`] snapshots with [`ingest`],
//! attach toxicity with [`scoring`], then derive every chart and triage
//! ordering with [`analytics`].

pub mod analytics;
pub mod http;
pub mod ingest;
pub mod model;
pub mod scoring;

pub use model::{Comment, Corpus, Post, ThreadTree, SCHEMA_VERSION};
