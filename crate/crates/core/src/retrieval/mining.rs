use std::io::Write;
use std::path::Path;

use super::csls::{check_pair, csls_scan, neighborhood_means};
use super::{CandidateSet, SimilarityParams};
use crate::corpus::{EmbeddingSpace, TranslationDictionary, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinedPair {
    pub src: WordId,
    pub tgt: WordId,
    pub score: f64,
}

/// Pairs `(s, t)` where `t` is the CSLS-best target of `s` and `s` the
/// CSLS-best source of `t`, sorted by descending score (ties by source id).
pub fn mutual_nn_pairs(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    params: &SimilarityParams,
) -> Result<Vec<MinedPair>> {
    check_pair(src, tgt)?;
    params.validate(src.len(), tgt.len())?;
    let means = neighborhood_means(src, tgt, params.k_csls);
    let out = csls_scan(src, tgt, &means, 1, true);
    let reverse = out.reverse_best.expect("reverse scan requested");
    let mut pairs: Vec<MinedPair> = out
        .top
        .iter()
        .enumerate()
        .filter_map(|(s, best)| {
            let c = best.first()?;
            (reverse[c.target].1 == s).then_some(MinedPair {
                src: s,
                tgt: c.target,
                score: c.score,
            })
        })
        .collect();
    pairs.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.src.cmp(&b.src)));
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AugmentReport {
    pub requested: usize,
    pub added: usize,
    pub shortfall: usize,
}

/// Adds the first `n_aug` mined pairs whose source is not already in the
/// seed. `mined` must be sorted best first.
pub fn augment_dictionary(
    seed: &TranslationDictionary,
    mined: &[MinedPair],
    n_aug: usize,
) -> (TranslationDictionary, AugmentReport) {
    let mut out = seed.clone();
    let mut added = 0;
    for p in mined {
        if added == n_aug {
            break;
        }
        if seed.contains_source(p.src) || out.contains_source(p.src) {
            continue;
        }
        out.insert(p.src, p.tgt);
        added += 1;
    }
    let report = AugmentReport {
        requested: n_aug,
        added,
        shortfall: n_aug - added,
    };
    if report.shortfall > 0 {
        log::warn!("augmentation added {added} of {n_aug} requested pairs");
    }
    (out, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub src: WordId,
    pub tgt: WordId,
    pub label: u8,
}

/// For every gold pair, the positive followed by the `n_neg` best-ranked
/// candidates outside the source's gold set.
pub fn mine_hard_negatives(
    dict: &TranslationDictionary,
    cands: &CandidateSet,
    n_neg: usize,
) -> Result<Vec<LabeledPair>> {
    let mut rows = Vec::new();
    for (src, gold) in dict.iter() {
        let list = cands.get(src).ok_or_else(|| {
            Error::invalid(format!("dictionary source id {src} has no retrieved candidates"))
        })?;
        let negatives: Vec<WordId> = list
            .iter()
            .map(|c| c.target)
            .filter(|t| !gold.contains(t))
            .take(n_neg)
            .collect();
        if negatives.is_empty() && n_neg > 0 {
            log::warn!("source id {src}: every candidate is gold, no negatives mined");
        }
        for &g in gold {
            rows.push(LabeledPair {
                src,
                tgt: g,
                label: 1,
            });
            rows.extend(negatives.iter().map(|&t| LabeledPair {
                src,
                tgt: t,
                label: 0,
            }));
        }
    }
    Ok(rows)
}

pub fn write_hard_negatives(
    path: &Path,
    rows: &[LabeledPair],
    src: &Vocabulary,
    tgt: &Vocabulary,
) -> Result<()> {
    tsv::write_with(path, |w| {
        for r in rows {
            writeln!(w, "{}\t{}\t{}", src.word(r.src), tgt.word(r.tgt), r.label)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_rows;
    use crate::retrieval::Candidate;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(m: Array2<f64>) -> EmbeddingSpace {
        let vocab = Vocabulary::from_words((0..m.nrows()).map(|i| format!("w{i}"))).unwrap();
        normalize_rows(EmbeddingSpace::new(vocab, m).unwrap()).0
    }

    #[test]
    fn identical_spaces_mine_all_self_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = space(Array2::from_shape_fn((10, 12), |_| rng.random::<f64>() - 0.5));
        let params = SimilarityParams { k_csls: 3, top_k: 5 };
        let pairs = mutual_nn_pairs(&s, &s, &params).unwrap();
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|p| p.src == p.tgt));
        assert!(pairs.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn broken_argmax_chain_is_excluded() {
        // Sources a=(1,0), b=(0.8,0.6); targets x=(0.9,0.436), y=(0,1).
        // With k_csls=2 every source's r is the mean over both targets.
        // cos: a·x=.9, a·y=0, b·x=.9816, b·y=.6
        // r_a=.45, r_b=.7908, r_x=(.9+.9816)/2=.9408, r_y=(0+.6)/2=.3
        // CSLS a: x -> 1.8-.45-.9408=.4092, y -> 0-.45-.3=-.75  => a→x
        // CSLS b: x -> 1.9632-.7908-.9408=.2316, y -> 1.2-.7908-.3=.1092 => b→x
        // x's best source: a (.4092 > .2316), so b is excluded.
        let s = space(array![[1.0, 0.0], [0.8, 0.6]]);
        let t = space(array![[0.9, 0.436], [0.0, 1.0]]);
        let params = SimilarityParams { k_csls: 2, top_k: 1 };
        let pairs = mutual_nn_pairs(&s, &t, &params).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].src, pairs[0].tgt), (0, 0));
    }

    fn mined(items: &[(usize, usize, f64)]) -> Vec<MinedPair> {
        items
            .iter()
            .map(|&(src, tgt, score)| MinedPair { src, tgt, score })
            .collect()
    }

    #[test]
    fn augmentation_skips_seed_sources_and_stops_at_budget() {
        let seed: TranslationDictionary = [(0, 9)].into_iter().collect();
        let m = mined(&[(0, 0, 0.9), (1, 1, 0.8), (2, 2, 0.7)]);
        let (d, r) = augment_dictionary(&seed, &m, 0);
        assert_eq!(d, seed);
        assert_eq!(r.added, 0);

        let (d, r) = augment_dictionary(&seed, &m, 1);
        assert_eq!(d.pairs().collect::<Vec<_>>(), vec![(0, 9), (1, 1)]);
        assert_eq!(r.added, 1);

        let (d, r) = augment_dictionary(&TranslationDictionary::new(), &m, 4000);
        assert_eq!(d.num_pairs(), 3);
        assert_eq!(r.shortfall, 3997);
    }

    fn cand_list(targets: impl IntoIterator<Item = usize>) -> Vec<Candidate> {
        targets
            .into_iter()
            .enumerate()
            .map(|(i, target)| Candidate {
                target,
                score: 1.0 - i as f64 * 0.01,
            })
            .collect()
    }

    #[test]
    fn twenty_negatives_per_positive() {
        let dict: TranslationDictionary = [(0, 7)].into_iter().collect();
        let mut cands = CandidateSet::new();
        cands.insert(0, cand_list(0..50));
        let rows = mine_hard_negatives(&dict, &cands, 20).unwrap();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0], LabeledPair { src: 0, tgt: 7, label: 1 });
        let negs: Vec<_> = rows[1..].iter().map(|r| r.tgt).collect();
        assert_eq!(negs, (0..21).filter(|&t| t != 7).collect::<Vec<_>>());
        assert!(rows[1..].iter().all(|r| r.label == 0));
    }

    #[test]
    fn saturated_gold_set_yields_no_negatives() {
        let dict: TranslationDictionary = [(0, 0), (0, 1)].into_iter().collect();
        let mut cands = CandidateSet::new();
        cands.insert(0, cand_list([1, 0]));
        let rows = mine_hard_negatives(&dict, &cands, 20).unwrap();
        assert_eq!(rows.iter().filter(|r| r.label == 0).count(), 0);
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn two_gold_targets_share_the_same_negatives() {
        let dict: TranslationDictionary = [(0, 3), (0, 5)].into_iter().collect();
        let mut cands = CandidateSet::new();
        cands.insert(0, cand_list(0..30));
        let rows = mine_hard_negatives(&dict, &cands, 20).unwrap();
        let expected_negs: Vec<usize> = (0..30).filter(|t| *t != 3 && *t != 5).take(20).collect();
        let mut expected = Vec::new();
        for g in [3, 5] {
            expected.push(LabeledPair { src: 0, tgt: g, label: 1 });
            expected.extend(expected_negs.iter().map(|&t| LabeledPair { src: 0, tgt: t, label: 0 }));
        }
        assert_eq!(rows, expected);
    }

    #[test]
    fn missing_candidates_are_fatal() {
        let dict: TranslationDictionary = [(4, 0)].into_iter().collect();
        assert!(mine_hard_negatives(&dict, &CandidateSet::new(), 20).is_err());
    }
}
