use crate::error::{Error, Result};
use crate::features::RankingGroup;

/// Min-max scaling to [0, 1]; a constant list maps to all 0.5.
pub fn minmax_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// `mix · ranker + (1 − mix) · csls` per group, both min-max normalized
/// within the group.
pub fn combine_with_retriever(ranker: &[Vec<f64>], csls: &[Vec<f64>], mix: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::invalid(format!("mix weight {mix} outside [0, 1]")));
    }
    if ranker.len() != csls.len() {
        return Err(Error::DimensionMismatch {
            expected: ranker.len(),
            found: csls.len(),
        });
    }
    ranker
        .iter()
        .zip(csls)
        .map(|(r, c)| {
            if r.len() != c.len() {
                return Err(Error::DimensionMismatch {
                    expected: r.len(),
                    found: c.len(),
                });
            }
            let (r, c) = (minmax_normalize(r), minmax_normalize(c));
            Ok(r.iter().zip(&c).map(|(a, b)| mix * a + (1.0 - mix) * b).collect())
        })
        .collect()
}

/// Grid value with the best P@1 on `groups`; ties keep the smaller weight.
pub fn select_mix(groups: &[RankingGroup], ranker: &[Vec<f64>], grid: &[f64]) -> Result<(f64, f64)> {
    let csls: Vec<Vec<f64>> = groups.iter().map(|g| g.csls.clone()).collect();
    let mut best: Option<(f64, f64)> = None;
    for &mix in grid {
        let combined = combine_with_retriever(ranker, &csls, mix)?;
        let p1 = crate::eval::precision_at_1(groups, &combined).p_at_1;
        if best.is_none_or(|(_, b)| p1 > b) {
            best = Some((mix, p1));
        }
    }
    best.ok_or_else(|| Error::invalid("empty mix grid"))
}
