//! Alignment, exact cosine/CSLS retrieval, mutual-NN mining, dictionary
//! augmentation, hard-negative export and hubness diagnostics.
//!
//! All scans are exhaustive; see `scan` for the blocked kernel.

mod csls;
mod hubness;
mod mining;
mod procrustes;
mod scan;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use csls::{csls_score, knn_mean_similarity, retrieve, retrieve_topk, NeighborhoodMeans};
pub use hubness::{hubness_skew, k_occurrence, skewness};
pub use mining::{
    augment_dictionary, mine_hard_negatives, mutual_nn_pairs, write_hard_negatives,
    AugmentReport, LabeledPair, MinedPair,
};
pub use procrustes::{align_procrustes, apply_map};

use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// Neighborhood size of the CSLS correction terms.
    pub k_csls: usize,
    /// Candidates retrieved per source word.
    pub top_k: usize,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            k_csls: 10,
            top_k: 50,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self, n_src: usize, n_tgt: usize) -> Result<()> {
        if self.k_csls == 0 || self.top_k == 0 {
            return Err(Error::invalid("k_csls and top_k must be at least 1"));
        }
        if self.top_k > n_tgt || self.k_csls > n_tgt || self.k_csls > n_src {
            return Err(Error::invalid(format!(
                "k_csls={} / top_k={} exceed vocabulary sizes (source {n_src}, target {n_tgt})",
                self.k_csls, self.top_k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Csls,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Csls => "csls",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "csls" => Ok(Metric::Csls),
            _ => Err(Error::invalid(format!("unknown metric {s:?} (cosine|csls)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub target: WordId,
    pub score: f64,
}

/// Retrieved candidates per source word, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    lists: BTreeMap<WordId, Vec<Candidate>>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: WordId, list: Vec<Candidate>) {
        self.lists.insert(src, list);
    }

    pub fn get(&self, src: WordId) -> Option<&[Candidate]> {
        self.lists.get(&src).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &[Candidate])> + '_ {
        self.lists.iter().map(|(&s, l)| (s, l.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Keeps only the given sources.
    pub fn restrict<I: IntoIterator<Item = WordId>>(&self, sources: I) -> Self {
        let lists = sources
            .into_iter()
            .filter_map(|s| self.lists.get(&s).map(|l| (s, l.clone())))
            .collect();
        Self { lists }
    }

    /// `src<TAB>cand<TAB>score` rows, scores at 6 decimals.
    pub fn write(&self, path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        tsv::write_with(path, |w| {
            for (s, list) in self.iter() {
                for c in list {
                    writeln!(w, "{}\t{}\t{:.6}", src.word(s), tgt.word(c.target), c.score)?;
                }
            }
            Ok(())
        })
    }

    /// Reads a candidate export. Rows for a source must be contiguous and
    /// are kept in file order.
    pub fn load(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<Self> {
        let mut set = CandidateSet::new();
        let mut current: Option<WordId> = None;
        for (line, fields) in tsv::read_records(path)? {
            let [s, t, score] = fields.as_slice() else {
                return Err(Error::parse(path, line, "expected `src<TAB>cand<TAB>score`"));
            };
            let s_id = src
                .lookup(&tsv::nfc(s))
                .ok_or_else(|| Error::parse(path, line, format!("unknown source word {s:?}")))?;
            let t_id = tgt
                .lookup(&tsv::nfc(t))
                .ok_or_else(|| Error::parse(path, line, format!("unknown candidate word {t:?}")))?;
            let score: f64 = score
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad score {score:?}")))?;
            if current != Some(s_id) {
                if set.lists.contains_key(&s_id) {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("rows for source {s:?} are not contiguous"),
                    ));
                }
                current = Some(s_id);
            }
            set.lists.entry(s_id).or_default().push(Candidate {
                target: t_id,
                score,
            });
        }
        Ok(set)
    }
}
