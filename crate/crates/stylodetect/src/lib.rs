//! Detection of machine-generated text from frequency-based stylometric
//! features.
//!
//! The pipeline ingests linguistically annotated documents (lemmas, POS
//! tags, morphology, dependency trees, named entities), extracts per-class
//! n-gram frequency features, builds a capped and optionally culled
//! vocabulary, vectorizes documents into sparse normalized-frequency
//! vectors, and classifies them with a gradient-boosted decision-tree
//! ensemble using DART dropout. Evaluation follows the shared-task metric
//! suite (ROC-AUC, Brier complement, C@1, F1, F0.5u) with per-source
//! macro-averaging, and a stratified k-fold harness provides single-fold
//! and fold-averaged scoring.
//!
//! Modules follow the pipeline order:
//!
//! * [`annotation`] — the annotated-document data model and validation
//! * [`corpus`] — CoNLL-U and JSON-lines ingest / export
//! * [`features`] — the four n-gram feature extractors
//! * [`vocab`] — vocabulary building, capping and document-frequency culling
//! * [`vectorize`] — sparse normalized-frequency vectors and matrices
//! * [`gbdt`] — the boosted-tree classifier (training, prediction, persistence)
//! * [`eval`] — the metric suite and macro-averaging
//! * [`cv`] — stratified cross-validation with -single / -cv scoring
//! * [`cli`] — the command-line front end
//!
//! See the crate `examples/` directory for one runnable example per
//! capability.

pub mod annotation;
pub mod cli;
#[cfg(test)]
pub(crate) mod testutil;
pub mod corpus;
pub mod cv;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod hexfloat;
pub mod vectorize;
pub mod vocab;

pub use annotation::{AnnotatedDocument, AnnotatedToken, NeTag, Sentence, Upos};
pub use features::{extract_all, FeatureBag, FeatureClass, FeatureKey};
pub use gbdt::{GbdtEnsemble, Preset, TrainParams};
pub use vectorize::{FeatureMatrix, SparseFeatureVector};
pub use vocab::Vocabulary;
