//! Multi-label phenotyping of clinical-style notes with a compact
//! transformer encoder.
//!
//! The crate covers the full experimental loop:
//!
//! * [`corpus`] — document model, JSONL/CSV ingestion, label statistics
//! * [`synth`] — deterministic synthetic corpus generation
//! * [`tokenizer`] — word-level vocabulary and encoding
//! * [`model`] — transformer encoder and classification heads
//! * [`train`] — loss, AdamW, training loop, gradient checking
//! * [`eval`] — stratified cross-validation and metrics
//! * [`experiment`] — end-to-end experiment configs and artifacts
//!
//! Everything is deterministic given a seed: corpora, parameter
//! initialization, training order, fold assignment, and serialized outputs.

pub mod corpus;
pub mod eval;
pub mod experiment;
pub mod guide;
pub mod label;
pub mod model;
pub mod seeding;
pub mod synth;
pub mod tokenizer;
pub mod train;
