//! Hubness diagnostics: the k-occurrence distribution `N_k(y)`, i.e. how
//! many sources list target `y` among their `k` nearest, and its skewness.

use super::csls::retrieve;
use super::{CandidateSet, Metric, SimilarityParams};
use crate::corpus::EmbeddingSpace;
use crate::error::Result;

/// `N_k(y)` for every target id, counted over the lists in `cands`.
pub fn k_occurrence(cands: &CandidateSet, n_tgt: usize, k: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_tgt];
    for (_, list) in cands.iter() {
        for c in list.iter().take(k) {
            counts[c.target] += 1;
        }
    }
    counts
}

/// Standardized third moment `m3 / m2^(3/2)`; 0 for a constant sample.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(m2, m3), v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Skewness of the k-occurrence distribution under `metric`. `k_csls` sets
/// the CSLS neighborhood and is ignored for cosine.
pub fn hubness_skew(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    k: usize,
    metric: Metric,
    k_csls: usize,
) -> Result<f64> {
    let params = SimilarityParams { k_csls, top_k: k };
    let (cands, _) = retrieve(src, tgt, &params, metric)?;
    let counts: Vec<f64> = k_occurrence(&cands, tgt.len(), k)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    Ok(skewness(&counts))
}
