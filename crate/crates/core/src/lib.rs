//! Sentence-analogy datasets and evaluation.
//!
//! The crate covers the whole path from raw material to accuracy tables:
//!
//! * [`datagen`] builds sentence pairs from templates, annotated corpora and
//!   NLI-style rows, and expands them into analogy questions;
//! * [`distractors`] corrupts target sentences into candidate sets;
//! * [`encoders`] turns word vectors into sentence vectors (mean, DCT);
//! * [`solver`] answers questions with 3CosAdd or 3CosMul;
//! * [`evaluator`] aggregates predictions into report tables.

pub mod annotation;
pub mod assets;
pub mod datagen;
pub mod distractors;
pub mod encoders;
pub mod error;
pub mod evaluator;
pub mod jsonl;
pub mod solver;
pub mod store;

pub use annotation::{AnnotatedSentence, Token};
pub use datagen::{AnalogyQuestion, CandidateScope, SentencePair, Template, WordPair};
pub use distractors::{CandidateSet, DistractorConfig, DistractorKind};
pub use encoders::{DctConfig, EncoderMethod, TokenizedSentence};
pub use error::{Error, Result};
pub use evaluator::{EvaluationReport, ReportFormat};
pub use solver::{Metric, Prediction, Solver, SolverConfig};
pub use store::{EmbeddingTable, OovMode, OovPolicy};
