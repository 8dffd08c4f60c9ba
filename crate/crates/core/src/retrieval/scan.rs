//! Blocked exact similarity scans.
//!
//! Similarities are produced tile by tile with a matrix product. Tile
//! boundaries are fixed constants, never derived from the worker count, so
//! every similarity value (and every reduction over them) is bitwise
//! identical for any thread pool size.

use std::cmp::Ordering;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use super::Candidate;

pub(crate) const ROW_BLOCK: usize = 256;
pub(crate) const COL_TILE: usize = 2048;

/// Sorted-descending buffer of the `k` largest values seen.
pub(crate) fn push_top_value(top: &mut [f64], v: f64) {
    let k = top.len();
    if v <= top[k - 1] {
        return;
    }
    let mut i = k - 1;
    while i > 0 && top[i - 1] < v {
        top[i] = top[i - 1];
        i -= 1;
    }
    top[i] = v;
}

fn merge_top_values(a: &mut [f64], b: &[f64]) {
    for &v in b {
        if v <= a[a.len() - 1] {
            break;
        }
        push_top_value(a, v);
    }
}

/// Mean of a descending top-k buffer, summed in descending order.
pub(crate) fn mean_of(top: &[f64]) -> f64 {
    top.iter().sum::<f64>() / top.len() as f64
}

/// `(score desc, id asc)`: `Less` means `a` ranks ahead of `b`.
pub(crate) fn rank_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.target.cmp(&b.target))
}

pub(crate) fn push_candidate(top: &mut Vec<Candidate>, cap: usize, c: Candidate) {
    if top.len() == cap {
        if rank_cmp(&c, &top[cap - 1]) != Ordering::Less {
            return;
        }
        top.pop();
    }
    let pos = top.partition_point(|x| rank_cmp(x, &c) == Ordering::Less);
    top.insert(pos, c);
}

fn sim_tile(queries: ArrayView2<'_, f64>, index: ArrayView2<'_, f64>, buf: &mut Array2<f64>) {
    let (m, n) = (queries.nrows(), index.nrows());
    if buf.dim() != (m, n) {
        *buf = Array2::zeros((m, n));
    }
    general_mat_mul(1.0, &queries, &index.t(), 0.0, buf);
}

fn blocks(n: usize, size: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(size))
        .map(|b| (b * size, ((b + 1) * size).min(n)))
        .collect()
}

/// For every row of `a`, the mean of its `k` largest similarities to rows
/// of `b`, and the same for every row of `b` against `a`.
///
/// `k_a` applies to rows of `a`, `k_b` to rows of `b`.
pub(crate) fn mutual_neighborhood_means(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    k_a: usize,
    k_b: usize,
) -> (Vec<f64>, Vec<f64>) {
    if a.nrows() > b.nrows() {
        let (rb, ra) = mutual_neighborhood_means(b, a, k_b, k_a);
        return (ra, rb);
    }
    // Parallel over tiles of the larger side `b`; each tile sees all of `a`
    // so its own top-k is complete, while `a`'s partial top-k buffers are
    // merged. The merged multiset of values is order independent.
    let n_a = a.nrows();
    let tiles = blocks(b.nrows(), COL_TILE);
    let empty = || (Vec::new(), vec![f64::NEG_INFINITY; n_a * k_a]);
    let (mut r_b_parts, top_a) = tiles
        .par_iter()
        .fold(empty, |(mut parts, mut top_a), &(c0, c1)| {
            let b_tile = b.slice(s![c0..c1, ..]);
            let mut top_b = vec![f64::NEG_INFINITY; (c1 - c0) * k_b];
            let mut buf = Array2::zeros((0, 0));
            for (r0, r1) in blocks(n_a, ROW_BLOCK) {
                sim_tile(a.slice(s![r0..r1, ..]), b_tile, &mut buf);
                for (i, row) in buf.rows().into_iter().enumerate() {
                    let ta = &mut top_a[(r0 + i) * k_a..(r0 + i + 1) * k_a];
                    for (j, &v) in row.iter().enumerate() {
                        push_top_value(ta, v);
                        push_top_value(&mut top_b[j * k_b..(j + 1) * k_b], v);
                    }
                }
            }
            parts.push((c0, top_b.chunks(k_b).map(mean_of).collect::<Vec<_>>()));
            (parts, top_a)
        })
        .reduce(empty, |(mut pa, mut ta), (pb, tb)| {
            pa.extend(pb);
            for (acc, part) in ta.chunks_mut(k_a).zip(tb.chunks(k_a)) {
                merge_top_values(acc, part);
            }
            (pa, ta)
        });
    r_b_parts.sort_by_key(|(c0, _)| *c0);
    let r_b: Vec<f64> = r_b_parts.into_iter().flat_map(|(_, r)| r).collect();
    let r_a = top_a.chunks(k_a).map(mean_of).collect();
    (r_a, r_b)
}

/// Mean of the `k` largest similarities of each query row to the index rows.
pub(crate) fn knn_means(queries: ArrayView2<'_, f64>, index: ArrayView2<'_, f64>, k: usize) -> Vec<f64> {
    let row_blocks = blocks(queries.nrows(), ROW_BLOCK);
    let col_tiles = blocks(index.nrows(), COL_TILE);
    let per_block: Vec<Vec<f64>> = row_blocks
        .par_iter()
        .map(|&(r0, r1)| {
            let q = queries.slice(s![r0..r1, ..]);
            let mut top = vec![f64::NEG_INFINITY; (r1 - r0) * k];
            let mut buf = Array2::zeros((0, 0));
            for &(c0, c1) in &col_tiles {
                sim_tile(q, index.slice(s![c0..c1, ..]), &mut buf);
                for (i, row) in buf.rows().into_iter().enumerate() {
                    let t = &mut top[i * k..(i + 1) * k];
                    for &v in row {
                        push_top_value(t, v);
                    }
                }
            }
            top.chunks(k).map(mean_of).collect()
        })
        .collect();
    per_block.concat()
}

/// Score adjustment applied to a raw similarity `s` between query `i` and
/// index item `j`: `scale * s - query_shift[i] - index_shift[j]`.
pub(crate) struct Scoring<'a> {
    pub scale: f64,
    pub query_shift: Option<&'a [f64]>,
    pub index_shift: Option<&'a [f64]>,
}

impl Scoring<'_> {
    #[inline]
    fn score(&self, s: f64, i: usize, j: usize) -> f64 {
        let mut v = self.scale * s;
        if let Some(q) = self.query_shift {
            v -= q[i];
        }
        if let Some(x) = self.index_shift {
            v -= x[j];
        }
        v
    }
}

pub(crate) struct ScanOutput {
    /// Per query row, best `top_k` index rows by `(score desc, id asc)`.
    pub top: Vec<Vec<Candidate>>,
    /// Per index row, its best query row `(score, query id)`, ties to the
    /// lowest query id. Only filled when requested.
    pub reverse_best: Option<Vec<(f64, usize)>>,
}

fn better_reverse(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Exhaustive top-k scan under an adjusted similarity.
pub(crate) fn scan_top_k(
    queries: ArrayView2<'_, f64>,
    index: ArrayView2<'_, f64>,
    scoring: &Scoring<'_>,
    top_k: usize,
    want_reverse: bool,
) -> ScanOutput {
    let n_idx = index.nrows();
    let col_tiles = blocks(n_idx, COL_TILE);
    let row_blocks = blocks(queries.nrows(), ROW_BLOCK);
    let per_block: Vec<(Vec<Vec<Candidate>>, Vec<(f64, usize)>)> = row_blocks
        .par_iter()
        .map(|&(r0, r1)| {
            let q = queries.slice(s![r0..r1, ..]);
            let mut top: Vec<Vec<Candidate>> =
                (r0..r1).map(|_| Vec::with_capacity(top_k + 1)).collect();
            let mut rev = if want_reverse {
                vec![(f64::NEG_INFINITY, usize::MAX); n_idx]
            } else {
                Vec::new()
            };
            let mut buf = Array2::zeros((0, 0));
            for &(c0, c1) in &col_tiles {
                sim_tile(q, index.slice(s![c0..c1, ..]), &mut buf);
                for (i, row) in buf.rows().into_iter().enumerate() {
                    let qi = r0 + i;
                    let list = &mut top[i];
                    for (j, &s) in row.iter().enumerate() {
                        let target = c0 + j;
                        let score = scoring.score(s, qi, target);
                        if want_reverse {
                            rev[target] = better_reverse(rev[target], (score, qi));
                        }
                        push_candidate(list, top_k, Candidate { target, score });
                    }
                }
            }
            (top, rev)
        })
        .collect();

    let mut top = Vec::with_capacity(queries.nrows());
    let mut reverse = want_reverse.then(|| vec![(f64::NEG_INFINITY, usize::MAX); n_idx]);
    for (t, rev) in per_block {
        top.extend(t);
        if let Some(acc) = reverse.as_mut() {
            for (a, b) in acc.iter_mut().zip(rev) {
                *a = better_reverse(*a, b);
            }
        }
    }
    ScanOutput {
        top,
        reverse_best: reverse,
    }
}
