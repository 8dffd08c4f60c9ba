use ndarray::ArrayView1;

use super::scan::{self, Scoring};
use super::{CandidateSet, Metric, SimilarityParams};
use crate::corpus::EmbeddingSpace;
use crate::error::{Error, Result};

/// The two CSLS correction terms.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodMeans {
    /// Per source word: mean cosine to its `k_csls` nearest targets.
    pub r_src: Vec<f64>,
    /// Per target word: mean cosine to its `k_csls` nearest sources.
    pub r_tgt: Vec<f64>,
}

/// `2·(x·y) − r_x − r_y` for unit vectors `x`, `y`.
pub fn csls_score(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, r_x: f64, r_y: f64) -> f64 {
    2.0 * x.dot(&y) - r_x - r_y
}

pub(crate) fn check_pair(src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    if !src.normalized || !tgt.normalized {
        return Err(Error::invalid("retrieval requires row-normalized embedding spaces"));
    }
    Ok(())
}

/// For each query row, the mean of its `k` largest dot products with the
/// index rows. A query that also occurs in the index is not excluded from
/// its own neighborhood.
pub fn knn_mean_similarity(queries: &EmbeddingSpace, index: &EmbeddingSpace, k: usize) -> Result<Vec<f64>> {
    check_pair(queries, index)?;
    if k == 0 || k > index.len() {
        return Err(Error::invalid(format!(
            "k={k} out of range for an index of {} rows",
            index.len()
        )));
    }
    Ok(scan::knn_means(queries.matrix.view(), index.matrix.view(), k))
}

pub(crate) fn neighborhood_means(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    k: usize,
) -> NeighborhoodMeans {
    let (r_src, r_tgt) = scan::mutual_neighborhood_means(src.matrix.view(), tgt.matrix.view(), k, k);
    NeighborhoodMeans { r_src, r_tgt }
}

pub(crate) fn csls_scan(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    means: &NeighborhoodMeans,
    top_k: usize,
    want_reverse: bool,
) -> scan::ScanOutput {
    let scoring = Scoring {
        scale: 2.0,
        query_shift: Some(&means.r_src),
        index_shift: Some(&means.r_tgt),
    };
    scan::scan_top_k(src.matrix.view(), tgt.matrix.view(), &scoring, top_k, want_reverse)
}

fn into_set(top: Vec<Vec<super::Candidate>>) -> CandidateSet {
    let mut set = CandidateSet::new();
    for (s, list) in top.into_iter().enumerate() {
        set.insert(s, list);
    }
    set
}

/// Top-`top_k` targets of every source word under CSLS, best first, ties by
/// ascending target id.
pub fn retrieve_topk(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    params: &SimilarityParams,
) -> Result<(CandidateSet, NeighborhoodMeans)> {
    check_pair(src, tgt)?;
    params.validate(src.len(), tgt.len())?;
    let means = neighborhood_means(src, tgt, params.k_csls);
    let out = csls_scan(src, tgt, &means, params.top_k, false);
    Ok((into_set(out.top), means))
}

/// Like [`retrieve_topk`] but with a selectable metric. Cosine retrieval
/// skips the neighborhood pass and returns no means.
pub fn retrieve(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    params: &SimilarityParams,
    metric: Metric,
) -> Result<(CandidateSet, Option<NeighborhoodMeans>)> {
    match metric {
        Metric::Csls => retrieve_topk(src, tgt, params).map(|(c, m)| (c, Some(m))),
        Metric::Cosine => {
            check_pair(src, tgt)?;
            params.validate(src.len(), tgt.len())?;
            let scoring = Scoring {
                scale: 1.0,
                query_shift: None,
                index_shift: None,
            };
            let out = scan::scan_top_k(src.matrix.view(), tgt.matrix.view(), &scoring, params.top_k, false);
            Ok((into_set(out.top), None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{normalize_rows, Vocabulary};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(m: Array2<f64>) -> EmbeddingSpace {
        let vocab = Vocabulary::from_words((0..m.nrows()).map(|i| format!("w{i}"))).unwrap();
        normalize_rows(EmbeddingSpace::new(vocab, m).unwrap()).0
    }

    fn random_space(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingSpace {
        space(Array2::from_shape_fn((n, d), |_| rng.random::<f64>() - 0.5))
    }

    #[test]
    fn csls_score_examples() {
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(csls_score(e1.view(), e1.view(), 1.0, 1.0), 0.0);
        assert_eq!(csls_score(e1.view(), e2.view(), 0.0, 0.0), 0.0);
        let x = array![0.8, 0.6];
        let y = array![1.0, 0.0];
        assert!((csls_score(x.view(), y.view(), 0.5, 0.3) - 0.8).abs() < 1e-15);
        // 2cos = 1.2 with correction terms 0.9 and 0.1
        let y = array![0.6, 0.8];
        let x = array![1.0, 0.0];
        assert!((csls_score(x.view(), y.view(), 0.9, 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn knn_mean_on_standard_basis() {
        let index = space(array![[1.0, 0.0], [0.0, 1.0]]);
        let query = space(array![[1.0, 0.0]]);
        assert_eq!(knn_mean_similarity(&query, &index, 1).unwrap(), vec![1.0]);
        assert_eq!(knn_mean_similarity(&query, &index, 2).unwrap(), vec![0.5]);
        assert!(knn_mean_similarity(&query, &index, 3).is_err());
        assert!(knn_mean_similarity(&query, &index, 0).is_err());
    }

    #[test]
    fn knn_mean_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_space(&mut rng, 50, 16);
        let idx = random_space(&mut rng, 50, 16);
        for k in [1, 3, 10, 50] {
            let got = knn_mean_similarity(&q, &idx, k).unwrap();
            for (i, g) in got.iter().enumerate() {
                let mut sims: Vec<f64> = (0..50).map(|j| q.row(i).dot(&idx.row(j))).collect();
                sims.sort_by(|a, b| b.total_cmp(a));
                let want = sims[..k].iter().sum::<f64>() / k as f64;
                assert!((g - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mutual_means_agree_with_one_sided_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // both size orderings exercise the swapped code path
        for (ns, nt) in [(30, 70), (70, 30)] {
            let s = random_space(&mut rng, ns, 8);
            let t = random_space(&mut rng, nt, 8);
            let m = neighborhood_means(&s, &t, 5);
            let r_src = knn_mean_similarity(&s, &t, 5).unwrap();
            let r_tgt = knn_mean_similarity(&t, &s, 5).unwrap();
            for (a, b) in m.r_src.iter().zip(&r_src).chain(m.r_tgt.iter().zip(&r_tgt)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_sources_rank_like_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tgt = random_space(&mut rng, 20, 6);
        let one = random_space(&mut rng, 1, 6);
        let src = space(Array2::from_shape_fn((5, 6), |(_, j)| one.matrix[[0, j]]));
        let params = SimilarityParams { k_csls: 3, top_k: 20 };
        let (csls, means) = retrieve_topk(&src, &tgt, &params).unwrap();
        let (cos, _) = retrieve(&src, &tgt, &params, Metric::Cosine).unwrap();
        // With identical sources every target's r_tgt equals its cosine
        // to the shared source vector, so CSLS = cos - r_src: same order.
        for t in 0..20 {
            let c = src.row(0).dot(&tgt.row(t));
            assert!((means.r_tgt[t] - c).abs() < 1e-12);
        }
        for s in 0..5 {
            let a: Vec<_> = csls.get(s).unwrap().iter().map(|c| c.target).collect();
            let b: Vec<_> = cos.get(s).unwrap().iter().map(|c| c.target).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shifting_target_terms_preserves_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = random_space(&mut rng, 40, 8);
        let tgt = random_space(&mut rng, 60, 8);
        let means = neighborhood_means(&src, &tgt, 4);
        let shifted = NeighborhoodMeans {
            r_src: means.r_src.clone(),
            r_tgt: means.r_tgt.iter().map(|r| r + 0.25).collect(),
        };
        let a = csls_scan(&src, &tgt, &means, 10, false).top;
        let b = csls_scan(&src, &tgt, &shifted, 10, false).top;
        for (la, lb) in a.iter().zip(&b) {
            for (ca, cb) in la.iter().zip(lb) {
                assert_eq!(ca.target, cb.target);
                assert!((ca.score - 0.25 - cb.score).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unnormalized_or_mismatched_spaces() {
        let vocab = Vocabulary::from_words(["a"]).unwrap();
        let raw = EmbeddingSpace::new(vocab, array![[1.0, 0.0]]).unwrap();
        let ok = space(array![[1.0, 0.0]]);
        let params = SimilarityParams { k_csls: 1, top_k: 1 };
        assert!(retrieve_topk(&raw, &ok, &params).is_err());
        let wide = space(array![[1.0, 0.0, 0.0]]);
        assert!(matches!(
            retrieve_topk(&ok, &wide, &params),
            Err(Error::DimensionMismatch { .. })
        ));
        let params = SimilarityParams { k_csls: 1, top_k: 2 };
        assert!(retrieve_topk(&ok, &ok, &params).is_err());
    }
}
