//! External lexical resources: embeddings, dictionaries, frequency and POS tables.
//!
//! Every loader NFC-normalizes tokens and otherwise treats them as exact
//! strings. Loaded structures are immutable and shared read-only by the
//! later pipeline stages.

mod dictionary;
mod embeddings;
mod frequency;
mod pos;

use std::collections::HashMap;

pub use dictionary::{load_dictionary, DictionaryReport, TranslationDictionary};
pub use embeddings::{
    load_embeddings, normalize_rows, write_embeddings, EmbeddingSpace, LoadReport,
    NormalizeReport,
};
pub use frequency::{load_frequency_table, write_counts, FrequencyTable};
pub use pos::{load_pos_table, write_pos_table, PosReport, PosTable, Upos};

use crate::error::{Error, Result};

/// Dense 0-based word index within one [`Vocabulary`].
pub type WordId = usize;

/// Ordered inventory of unique words for one language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from distinct words; duplicates are rejected.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for w in words {
            let w = w.into();
            if vocab.insert(w.clone()).is_none() {
                return Err(Error::invalid(format!("duplicate word {w:?} in vocabulary")));
            }
        }
        Ok(vocab)
    }

    /// Appends `word` and returns its id, or `None` if it is already present.
    pub fn insert(&mut self, word: String) -> Option<WordId> {
        if self.index.contains_key(&word) {
            return None;
        }
        let id = self.words.len();
        self.index.insert(word.clone(), id);
        self.words.push(word);
        Some(id)
    }

    pub fn lookup(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
