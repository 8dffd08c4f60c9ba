//! Exact greedy second-order regression trees.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GbdtParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// A binary tree stored as a node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Index of the leaf `x` is routed to.
    pub fn leaf_index(&self, x: ArrayView1<'_, f64>) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Checks that the node array forms a proper tree over `n_features`
    /// columns with finite values.
    pub fn validate(&self, n_features: usize, max_depth: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::invalid("tree has no nodes"));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("node {i} is out of range or shared")));
            }
            match self.nodes[i] {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::invalid(format!("leaf {i} has non-finite value")))
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::invalid(format!("split node {i} is invalid")));
                    }
                    if depth + 1 > max_depth {
                        return Err(Error::invalid(format!("tree deeper than {max_depth}")));
                    }
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("tree has unreachable nodes"));
        }
        Ok(())
    }
}

/// Training rows with per-feature presorted row orders, reused across
/// boosting rounds.
pub(crate) struct SortedColumns<'a> {
    x: ArrayView2<'a, f64>,
    order: Vec<Vec<u32>>,
    // column values in sorted order, contiguous for the split scan
    sorted: Vec<Vec<f64>>,
}

impl<'a> SortedColumns<'a> {
    pub(crate) fn new(x: ArrayView2<'a, f64>) -> Self {
        let order = (0..x.ncols())
            .into_par_iter()
            .map(|f| {
                let col = x.column(f);
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect::<Vec<_>>();
        let sorted = order
            .iter()
            .enumerate()
            .map(|(f, idx)| idx.iter().map(|&r| x[[r as usize, f]]).collect())
            .collect();
        Self { x, order, sorted }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    threshold: f64,
    g_left: f64,
    h_left: f64,
}

struct NodeStats {
    id: usize,
    g: f64,
    h: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda <= 0.0 {
        return 0.0;
    }
    // + 0.0 turns a negative zero into zero
    -g / (h + lambda) + 0.0
}

const UNASSIGNED: u32 = u32::MAX;

/// Grows one tree level by level with exact greedy split search.
pub(crate) fn fit_sorted(cols: &SortedColumns<'_>, g: &[f64], h: &[f64], params: &GbdtParams) -> RegressionTree {
    let x = cols.x;
    let n = x.nrows();
    let lambda = params.l2_leaf_reg;
    let mcw = params.min_child_weight;

    let gh: Vec<(f64, f64)> = g.iter().copied().zip(h.iter().copied()).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // slot of the active node each row belongs to at the current level
    let mut slot_of = vec![0u32; n];
    let (g_all, h_all) = (0..n).fold((0.0, 0.0), |(a, b), r| (a + g[r], b + h[r]));
    let mut active = vec![NodeStats {
        id: 0,
        g: g_all,
        h: h_all,
    }];

    for _depth in 0..params.max_depth {
        if active.is_empty() {
            break;
        }
        let per_feature: Vec<Vec<Option<Best>>> = (0..x.ncols())
            .into_par_iter()
            .map(|f| best_splits_for_feature(&cols.sorted[f], &cols.order[f], &slot_of, &active, &gh, lambda, mcw))
            .collect();

        let mut next = Vec::new();
        let mut split_of: Vec<Option<(usize, f64)>> = vec![None; active.len()];
        let mut child_slots = vec![(UNASSIGNED, UNASSIGNED); active.len()];
        for (slot, node) in active.iter().enumerate() {
            // lowest feature index wins ties
            let mut best: Option<(usize, Best)> = None;
            for (f, cands) in per_feature.iter().enumerate() {
                if let Some(b) = cands[slot] {
                    if best.is_none_or(|(_, cur)| b.gain > cur.gain) {
                        best = Some((f, b));
                    }
                }
            }
            match best {
                Some((feature, b)) if b.gain > 0.0 => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node.id] = Node::Split {
                        feature,
                        threshold: b.threshold,
                        left,
                        right,
                    };
                    split_of[slot] = Some((feature, b.threshold));
                    child_slots[slot] = (next.len() as u32, next.len() as u32 + 1);
                    next.push(NodeStats {
                        id: left,
                        g: b.g_left,
                        h: b.h_left,
                    });
                    next.push(NodeStats {
                        id: right,
                        g: node.g - b.g_left,
                        h: node.h - b.h_left,
                    });
                }
                _ => {
                    nodes[node.id] = Node::Leaf {
                        value: leaf_value(node.g, node.h, lambda),
                    };
                }
            }
        }

        for (r, slot) in slot_of.iter_mut().enumerate() {
            if *slot == UNASSIGNED {
                continue;
            }
            let s = *slot as usize;
            *slot = match split_of[s] {
                Some((f, thr)) => {
                    if x[[r, f]] < thr {
                        child_slots[s].0
                    } else {
                        child_slots[s].1
                    }
                }
                None => UNASSIGNED,
            };
        }
        // exact child sums in row order
        for st in next.iter_mut() {
            st.g = 0.0;
            st.h = 0.0;
        }
        for (r, &slot) in slot_of.iter().enumerate() {
            if slot != UNASSIGNED {
                next[slot as usize].g += g[r];
                next[slot as usize].h += h[r];
            }
        }
        active = next;
    }
    for node in &active {
        nodes[node.id] = Node::Leaf {
            value: leaf_value(node.g, node.h, lambda),
        };
    }
    RegressionTree { nodes }
}

fn best_splits_for_feature(
    values: &[f64],
    order: &[u32],
    slot_of: &[u32],
    active: &[NodeStats],
    gh: &[(f64, f64)],
    lambda: f64,
    mcw: f64,
) -> Vec<Option<Best>> {
    let k = active.len();
    let mut best: Vec<Option<Best>> = vec![None; k];
    if values.first() == values.last() {
        return best;
    }
    let parent: Vec<f64> = active.iter().map(|a| score(a.g, a.h, lambda)).collect();
    let mut left = vec![(0.0f64, 0.0f64); k];
    let mut last = vec![0.0f64; k];
    let mut seen = vec![false; k];
    let mut best_gain = vec![f64::NEG_INFINITY; k];
    for (&r, &v) in order.iter().zip(values) {
        let slot = slot_of[r as usize];
        if slot == UNASSIGNED {
            continue;
        }
        let s = slot as usize;
        let (gl, hl) = left[s];
        if seen[s] && v > last[s] {
            let (gr, hr) = (active[s].g - gl, active[s].h - hl);
            if hl >= mcw && hr >= mcw && hl + lambda > 0.0 && hr + lambda > 0.0 {
                let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent[s]);
                if gain > best_gain[s] {
                    best_gain[s] = gain;
                    let prev = last[s];
                    let mut threshold = prev + (v - prev) / 2.0;
                    if !(prev < threshold && threshold <= v) {
                        threshold = v;
                    }
                    best[s] = Some(Best {
                        gain,
                        threshold,
                        g_left: gl,
                        h_left: hl,
                    });
                }
            }
        }
        let (g, h) = gh[r as usize];
        left[s] = (gl + g, hl + h);
        last[s] = v;
        seen[s] = true;
    }
    best
}

/// Fits a single tree to per-row gradients `g` and hessians `h`.
pub fn fit_tree(features: ArrayView2<'_, f64>, g: &[f64], h: &[f64], params: &GbdtParams) -> Result<RegressionTree> {
    if features.nrows() == 0 {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    if g.len() != features.nrows() || h.len() != features.nrows() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: g.len().min(h.len()),
        });
    }
    params.validate()?;
    Ok(fit_sorted(&SortedColumns::new(features), g, h, params))
}
