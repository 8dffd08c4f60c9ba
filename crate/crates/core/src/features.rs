//! Per-candidate feature vectors and labeled ranking groups.
//!
//! Column layout (46 columns):
//!
//! | index  | feature                                      |
//! |--------|----------------------------------------------|
//! | 0      | `csls` retriever score                       |
//! | 1      | `ext_logit` external reranker logit (or 0)   |
//! | 2      | `ext_present` 1 if an external logit exists  |
//! | 3, 4   | `zipf_src`, `zipf_cand`                      |
//! | 5, 6   | `zipf_diff` (src − cand), `zipf_absdiff`     |
//! | 7, 8   | `log_rank_src`, `log_rank_cand` = log2(1+r)  |
//! | 9      | `pos_match`                                  |
//! | 10..28 | one-hot source POS (17 UPOS + UNK)           |
//! | 28..46 | one-hot candidate POS                        |

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrequencyTable, PosTable, TranslationDictionary, Upos, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::retrieval::CandidateSet;
use crate::tsv;

pub const NUM_FEATURES: usize = 10 + 2 * Upos::COUNT;

pub const CSLS: usize = 0;
pub const EXT_LOGIT: usize = 1;
pub const EXT_PRESENT: usize = 2;
pub const ZIPF_SRC: usize = 3;
pub const ZIPF_CAND: usize = 4;
pub const ZIPF_DIFF: usize = 5;
pub const ZIPF_ABSDIFF: usize = 6;
pub const LOG_RANK_SRC: usize = 7;
pub const LOG_RANK_CAND: usize = 8;
pub const POS_MATCH: usize = 9;
pub const POS_SRC: usize = 10;
pub const POS_CAND: usize = POS_SRC + Upos::COUNT;

/// The fixed feature layout, with a fingerprint that models record.
pub struct FeatureSchema;

impl FeatureSchema {
    pub fn names() -> Vec<String> {
        let mut names: Vec<String> = [
            "csls",
            "ext_logit",
            "ext_present",
            "zipf_src",
            "zipf_cand",
            "zipf_diff",
            "zipf_absdiff",
            "log_rank_src",
            "log_rank_cand",
            "pos_match",
        ]
        .map(String::from)
        .to_vec();
        names.extend(Upos::ALL.iter().map(|t| format!("pos_src_{t}")));
        names.extend(Upos::ALL.iter().map(|t| format!("pos_cand_{t}")));
        names
    }

    /// FNV-1a over the newline-joined column names, as 16 hex digits.
    pub fn fingerprint() -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for name in Self::names() {
            for b in name.bytes().chain(std::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Ablation switches; masked columns are zeroed but kept in the layout.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub no_pos: bool,
    pub no_freq: bool,
}

impl FeatureMask {
    pub fn masked_columns(&self) -> Vec<usize> {
        let mut cols = Vec::new();
        if self.no_freq {
            cols.extend(ZIPF_SRC..=LOG_RANK_CAND);
        }
        if self.no_pos {
            cols.push(POS_MATCH);
            cols.extend(POS_SRC..NUM_FEATURES);
        }
        cols
    }

    pub fn apply(&self, row: &mut [f64]) {
        for c in self.masked_columns() {
            row[c] = 0.0;
        }
    }
}

/// External reranker logits keyed by `(source id, candidate id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    scores: HashMap<(WordId, WordId), f64>,
}

impl ExternalScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: WordId, cand: WordId, logit: f64) -> Result<Option<f64>> {
        if !logit.is_finite() {
            return Err(Error::invalid(format!("non-finite external score {logit}")));
        }
        Ok(self.scores.insert((src, cand), logit))
    }

    pub fn get(&self, src: WordId, cand: WordId) -> Option<f64> {
        self.scores.get(&(src, cand)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Loads `src<TAB>cand<TAB>logit`; pairs with OOV words are skipped and
    /// duplicate keys keep the last value.
    pub fn load(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<Self> {
        let mut out = ExternalScores::new();
        let mut skipped = 0usize;
        for (line, fields) in tsv::read_records(path)? {
            let [s, t, logit] = fields.as_slice() else {
                return Err(Error::parse(path, line, "expected `src<TAB>cand<TAB>logit`"));
            };
            let logit: f64 = logit
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad logit {logit:?}")))?;
            match (src.lookup(&tsv::nfc(s)), tgt.lookup(&tsv::nfc(t))) {
                (Some(s_id), Some(t_id)) => {
                    if out.insert(s_id, t_id, logit)?.is_some() {
                        log::warn!("{}:{line}: duplicate pair {s:?}/{t:?}, last value wins", path.display());
                    }
                }
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{}: {skipped} pairs with OOV words skipped", path.display());
        }
        Ok(out)
    }
}

/// Lexical resources shared by every featurized pair.
#[derive(Clone, Copy)]
pub struct FeatureContext<'a> {
    pub freq_src: &'a FrequencyTable,
    pub freq_tgt: &'a FrequencyTable,
    pub pos_src: &'a PosTable,
    pub pos_tgt: &'a PosTable,
    pub ext: Option<&'a ExternalScores>,
    pub mask: FeatureMask,
}

fn log_rank(rank: usize) -> f64 {
    (1.0 + rank as f64).log2()
}

/// Feature vector of one `(source, candidate)` pair.
pub fn featurize_pair(
    src: WordId,
    cand: WordId,
    csls: f64,
    ext: Option<f64>,
    ctx: &FeatureContext<'_>,
) -> [f64; NUM_FEATURES] {
    let mut x = [0.0; NUM_FEATURES];
    x[CSLS] = csls;
    if let Some(logit) = ext {
        x[EXT_LOGIT] = logit;
        x[EXT_PRESENT] = 1.0;
    }
    let (zs, zc) = (ctx.freq_src.zipf(src), ctx.freq_tgt.zipf(cand));
    x[ZIPF_SRC] = zs;
    x[ZIPF_CAND] = zc;
    x[ZIPF_DIFF] = zs - zc;
    x[ZIPF_ABSDIFF] = (zs - zc).abs();
    x[LOG_RANK_SRC] = log_rank(ctx.freq_src.rank(src));
    x[LOG_RANK_CAND] = log_rank(ctx.freq_tgt.rank(cand));
    let (ps, pc) = (ctx.pos_src.tag(src), ctx.pos_tgt.tag(cand));
    x[POS_MATCH] = if ps == pc { 1.0 } else { 0.0 };
    x[POS_SRC + ps.index()] = 1.0;
    x[POS_CAND + pc.index()] = 1.0;
    ctx.mask.apply(&mut x);
    x
}

/// One source word with its retrieved candidates; the unit of ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingGroup {
    pub src: WordId,
    pub candidates: Vec<WordId>,
    pub labels: Vec<u8>,
    pub features: Array2<f64>,
    pub csls: Vec<f64>,
    /// Gold translations exist but none was retrieved.
    pub gold_missed: bool,
}

impl RankingGroup {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Has both a positive and a negative, so carries a ranking signal.
    pub fn is_trainable(&self) -> bool {
        let p = self.num_positive();
        p > 0 && p < self.len()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }
}

/// 1 for candidates in the source's gold set. Returns the labels and
/// whether the gold set was missed entirely.
pub fn label_candidates(
    src: WordId,
    cands: &[WordId],
    dict: &TranslationDictionary,
) -> Result<(Vec<u8>, bool)> {
    if cands.is_empty() {
        return Err(Error::invalid(format!("source id {src} has an empty candidate list")));
    }
    let labels: Vec<u8> = cands.iter().map(|&c| u8::from(dict.is_gold(src, c))).collect();
    let missed = dict.contains_source(src) && labels.iter().all(|&l| l == 0);
    Ok((labels, missed))
}

/// One group per requested source, candidates in retrieval order. Labels
/// come from `dict` when given, otherwise all zero.
pub fn build_groups(
    sources: &[WordId],
    dict: Option<&TranslationDictionary>,
    cands: &CandidateSet,
    ctx: &FeatureContext<'_>,
) -> Result<Vec<RankingGroup>> {
    sources
        .par_iter()
        .map(|&src| {
            let list = cands.get(src).ok_or_else(|| {
                Error::invalid(format!("source id {src} has no retrieved candidates"))
            })?;
            let candidates: Vec<WordId> = list.iter().map(|c| c.target).collect();
            let (labels, gold_missed) = match dict {
                Some(d) => label_candidates(src, &candidates, d)?,
                None if candidates.is_empty() => {
                    return Err(Error::invalid(format!("source id {src} has an empty candidate list")))
                }
                None => (vec![0; candidates.len()], false),
            };
            let mut features = Array2::zeros((candidates.len(), NUM_FEATURES));
            for (i, c) in list.iter().enumerate() {
                let ext = ctx.ext.and_then(|e| e.get(src, c.target));
                let x = featurize_pair(src, c.target, c.score, ext, ctx);
                features.row_mut(i).assign(&ArrayView1::from(&x[..]));
            }
            Ok(RankingGroup {
                src,
                candidates,
                labels,
                features,
                csls: list.iter().map(|c| c.score).collect(),
                gold_missed,
            })
        })
        .collect()
}

/// Debug export with a header row of column names.
pub fn write_feature_matrix(
    path: &Path,
    groups: &[RankingGroup],
    src: &Vocabulary,
    tgt: &Vocabulary,
) -> Result<()> {
    tsv::write_with(path, |w| {
        write!(w, "src\tcand\tlabel")?;
        for name in FeatureSchema::names() {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for g in groups {
            for (i, &c) in g.candidates.iter().enumerate() {
                write!(w, "{}\t{}\t{}", src.word(g.src), tgt.word(c), g.labels[i])?;
                for v in g.row(i) {
                    write!(w, "\t{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Candidate;

    struct Tables {
        freq_src: FrequencyTable,
        freq_tgt: FrequencyTable,
        pos_src: PosTable,
        pos_tgt: PosTable,
    }

    impl Tables {
        fn ctx(&self) -> FeatureContext<'_> {
            FeatureContext {
                freq_src: &self.freq_src,
                freq_tgt: &self.freq_tgt,
                pos_src: &self.pos_src,
                pos_tgt: &self.pos_tgt,
                ext: None,
                mask: FeatureMask::default(),
            }
        }
    }

    fn tables() -> Tables {
        // zipf 6.0 and 4.5 against a 10^6-token corpus
        Tables {
            freq_src: FrequencyTable::from_counts(&[Some(1000), Some(10), None], 1_000_000).unwrap(),
            freq_tgt: FrequencyTable::from_counts(&[Some(1000), None, Some(10), Some(5)], 31_622_777)
                .unwrap(),
            pos_src: PosTable::new(vec![Upos::Noun, Upos::Verb, Upos::Unk]),
            pos_tgt: PosTable::new(vec![Upos::Noun, Upos::Adj, Upos::Verb, Upos::Unk]),
        }
    }

    #[test]
    fn schema_has_46_named_columns() {
        let names = FeatureSchema::names();
        assert_eq!(names.len(), NUM_FEATURES);
        assert_eq!(NUM_FEATURES, 46);
        assert_eq!(names[POS_SRC], "pos_src_ADJ");
        assert_eq!(names[POS_CAND - 1], "pos_src_UNK");
        assert_eq!(FeatureSchema::fingerprint().len(), 16);
    }

    #[test]
    fn noun_noun_pair_matches() {
        let t = tables();
        let x = featurize_pair(0, 0, 0.3, None, &t.ctx());
        assert_eq!(x[POS_MATCH], 1.0);
        assert_eq!(x[POS_SRC + Upos::Noun.index()], 1.0);
        assert_eq!(x[POS_CAND + Upos::Noun.index()], 1.0);
        assert_eq!(x[POS_SRC..POS_CAND].iter().sum::<f64>(), 1.0);
        assert_eq!(x[POS_CAND..].iter().sum::<f64>(), 1.0);
        assert_eq!((x[EXT_LOGIT], x[EXT_PRESENT]), (0.0, 0.0));
    }

    #[test]
    fn zipf_difference_features() {
        let t = tables();
        let x = featurize_pair(0, 0, 0.0, Some(-1.5), &t.ctx());
        assert_eq!(x[ZIPF_SRC], 6.0);
        assert!((x[ZIPF_CAND] - 4.5).abs() < 1e-6);
        assert!((x[ZIPF_DIFF] - 1.5).abs() < 1e-6);
        assert_eq!(x[ZIPF_ABSDIFF], x[ZIPF_DIFF].abs());
        assert_eq!((x[EXT_LOGIT], x[EXT_PRESENT]), (-1.5, 1.0));
    }

    #[test]
    fn log_rank_of_large_rank() {
        assert!((log_rank(15490) - 13.92).abs() < 0.005);
        assert_eq!(log_rank(1), 1.0);
    }

    #[test]
    fn mask_zeroes_columns_but_keeps_length() {
        let t = tables();
        let mut ctx = t.ctx();
        ctx.mask = FeatureMask {
            no_pos: true,
            no_freq: true,
        };
        let x = featurize_pair(0, 0, 0.7, Some(2.0), &ctx);
        assert_eq!(x.len(), NUM_FEATURES);
        assert_eq!(&x[..3], &[0.7, 2.0, 1.0]);
        assert!(x[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn labels_from_gold_membership() {
        let dict: TranslationDictionary = [(0, 0), (0, 2)].into_iter().collect();
        let (labels, missed) = label_candidates(0, &[0, 1, 2], &dict).unwrap();
        assert_eq!(labels, vec![1, 0, 1]);
        assert!(!missed);
        let (labels, missed) = label_candidates(0, &[1, 3], &dict).unwrap();
        assert_eq!(labels, vec![0, 0]);
        assert!(missed);
        assert!(label_candidates(0, &[], &dict).is_err());
    }

    fn cands(lists: &[(WordId, &[WordId])]) -> CandidateSet {
        let mut set = CandidateSet::new();
        for &(s, l) in lists {
            set.insert(
                s,
                l.iter()
                    .enumerate()
                    .map(|(i, &target)| Candidate {
                        target,
                        score: 0.5 - 0.1 * i as f64,
                    })
                    .collect(),
            );
        }
        set
    }

    #[test]
    fn groups_keep_retrieval_order_and_flag_misses() {
        let t = tables();
        let dict: TranslationDictionary = [(0, 0), (1, 2)].into_iter().collect();
        let set = cands(&[(0, &[1, 0, 3]), (1, &[0, 1, 3])]);
        let mut ext = ExternalScores::new();
        ext.insert(0, 1, 0.25).unwrap();
        let mut ctx = t.ctx();
        ctx.ext = Some(&ext);
        let groups = build_groups(&[0, 1], Some(&dict), &set, &ctx).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].candidates, vec![1, 0, 3]);
        assert_eq!(groups[0].labels, vec![0, 1, 0]);
        assert_eq!(groups[0].features.dim(), (3, NUM_FEATURES));
        assert_eq!(groups[0].features.column(EXT_PRESENT).to_vec(), vec![1.0, 0.0, 0.0]);
        assert!(!groups[0].gold_missed);
        assert!(groups[1].gold_missed);
        assert!(build_groups(&[2], Some(&dict), &set, &ctx).is_err());
        let unlabeled = build_groups(&[1], None, &set, &ctx).unwrap();
        assert_eq!(unlabeled[0].labels, vec![0, 0, 0]);
    }
}
