use std::cmp::Ordering;

use crate::features::RankingGroup;

/// Item indices by descending score, ties by ascending position.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order
}

/// Average precision of binary labels given in ranked order; 0 without
/// positives.
pub fn average_precision(ranked_labels: &[u8]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &l) in ranked_labels.iter().enumerate() {
        if l == 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Labels of a group reordered by `scores`.
pub fn ranked_labels(labels: &[u8], scores: &[f64]) -> Vec<u8> {
    rank_order(scores).into_iter().map(|i| labels[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSummary {
    pub map: f64,
    /// Groups with at least one positive.
    pub n_scored: usize,
    /// Groups left out for having no positive.
    pub n_excluded: usize,
}

/// Mean AP over groups that have at least one positive.
pub fn mean_ap(groups: &[RankingGroup], scores: &[Vec<f64>]) -> MapSummary {
    let mut sum = 0.0;
    let mut n_scored = 0;
    for (g, s) in groups.iter().zip(scores) {
        if g.num_positive() == 0 {
            continue;
        }
        sum += average_precision(&ranked_labels(&g.labels, s));
        n_scored += 1;
    }
    MapSummary {
        map: if n_scored == 0 { 0.0 } else { sum / n_scored as f64 },
        n_scored,
        n_excluded: groups.len() - n_scored,
    }
}

/// Prefix statistics answering AP swap deltas in O(1).
pub(crate) struct ApSwap {
    /// Positives at positions `0..=r`.
    count: Vec<usize>,
    /// Σ 1/(q+1) over positive positions `q ≤ r`.
    inv: Vec<f64>,
    ranked: Vec<u8>,
    positives: usize,
}

impl ApSwap {
    pub(crate) fn new(ranked: &[u8]) -> Self {
        let mut count = Vec::with_capacity(ranked.len());
        let mut inv = Vec::with_capacity(ranked.len());
        let (mut c, mut s) = (0usize, 0.0);
        for (r, &l) in ranked.iter().enumerate() {
            if l == 1 {
                c += 1;
                s += 1.0 / (r + 1) as f64;
            }
            count.push(c);
            inv.push(s);
        }
        Self {
            count,
            inv,
            ranked: ranked.to_vec(),
            positives: c,
        }
    }

    /// AP after swapping positions `i` and `j`, minus AP before.
    pub(crate) fn delta(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let (la, lb) = (self.ranked[a], self.ranked[b]);
        if la == lb || self.positives == 0 {
            return 0.0;
        }
        let between = self.inv[b - 1] - self.inv[a];
        let (ra, rb) = ((a + 1) as f64, (b + 1) as f64);
        let (ca, cb) = (self.count[a] as f64, self.count[b] as f64);
        let change = if la == 1 {
            // positive moves down from a to b
            cb / rb - ca / ra - between
        } else {
            // positive moves up from b to a
            (ca + 1.0) / ra - cb / rb + between
        };
        change / self.positives as f64
    }
}

/// Change in AP from swapping the items at ranked positions `i` and `j`.
/// `ranking[p]` is the item at position `p`; `labels` is indexed by item.
pub fn delta_ap(labels: &[u8], ranking: &[usize], i: usize, j: usize) -> f64 {
    let ranked: Vec<u8> = ranking.iter().map(|&item| labels[item]).collect();
    ApSwap::new(&ranked).delta(i, j)
}
