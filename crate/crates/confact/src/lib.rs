//! Credibility-aware retrieval-augmented fact checking over conflicting
//! evidence.
//!
//! The pipeline takes claims with pre-retrieved evidence documents, chunks
//! the documents into passages, ranks passages by BM25 relevance optionally
//! fused with source credibility, prompts an LLM under one of eight answering
//! strategies, and scores the verdicts with accuracy and macro-F1. It also
//! ships the stance-annotation and conflict-mining procedure used to build
//! such datasets, and a curated-plus-generated source background provider.
//!
//! ## Modules
//!
//! - [`corpus`] — dataset model, JSONL format, validation, claim-to-question
//!   conversion and registrable-domain extraction.
//! - [`chunking`] — paragraph and sentence passage segmentation.
//! - [`ranking`] — BM25 scoring, source filtering (SF) and credibility
//!   weighting (CW soft/hard).
//! - [`credibility`] — curated table lookup and hybrid LLM-generated source
//!   backgrounds with level classification.
//! - [`generation`] — prompt strategies, answer parsing, majority voting and
//!   the two-stage ensemble.
//! - [`annotation`] — three-variant stance annotation and conflict detection.
//! - [`llm`] — OpenAI-compatible client plus deterministic record/replay.
//! - [`evaluation`] — accuracy/macro-F1 scoring and report rendering.
//! - [`experiment`] — config-driven, resumable experiment grids.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p confact --example dataset_tour
//! cargo run -p confact --example chunk_passages
//! cargo run -p confact --example rank_fusion
//! cargo run -p confact --example source_backgrounds
//! cargo run -p confact --example prompt_strategies
//! cargo run -p confact --example record_replay
//! cargo run -p confact --example annotate_conflicts
//! cargo run -p confact --example evaluate_verdicts
//! cargo run -p confact --example end_to_end
//! ```
//!
//! The `confact` binary wires the same library functions into subcommands
//! (`validate`, `stats`, `chunk`, `rank`, `background`, `annotate`,
//! `conflicts`, `run`, `eval`, `report`).

pub mod annotation;
pub mod chunking;
pub mod corpus;
pub mod credibility;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod generation;
pub mod llm;
pub mod prompts;
pub mod ranking;

pub use error::{Error, Result};
