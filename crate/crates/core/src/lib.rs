//! Retrieve-and-rank bilingual lexicon induction.
//!
//! The pipeline runs in stages that map onto the modules of this crate:
//!
//! * [`corpus`] loads embeddings, dictionaries, frequency and POS tables;
//! * [`retrieval`] aligns spaces with Procrustes and retrieves CSLS candidates;
//! * [`features`] turns candidates into labeled ranking groups;
//! * [`ltr`] trains and applies a listwise (MAP) gradient-boosted tree ranker;
//! * [`eval`] measures P@1 and runs the error analyses;
//! * [`synth`] generates deterministic synthetic bilingual worlds.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod ltr;
pub mod retrieval;
pub mod synth;
mod tsv;

pub use corpus::{
    EmbeddingSpace, FrequencyTable, PosTable, TranslationDictionary, Upos, Vocabulary, WordId,
};
pub use error::{Error, Result};


pub use retrieval::{CandidateSet, Metric, SimilarityParams};
pub use features::{FeatureMask, FeatureSchema, RankingGroup, NUM_FEATURES};
pub use ltr::{GbdtModel, GbdtParams, RegressionTree};
