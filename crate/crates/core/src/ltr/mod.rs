//! Listwise gradient-boosted tree ranker (LambdaMART with a MAP objective),
//! ranking metrics and model persistence.

mod combine;
mod lambda;
mod metrics;
mod model;
mod tree;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use combine::{combine_with_retriever, minmax_normalize, select_mix};
pub use lambda::compute_lambdas;
pub use metrics::{average_precision, delta_ap, mean_ap, rank_order, ranked_labels, MapSummary};
pub use model::{load_model, save_model, write_trace, GbdtModel, MODEL_FORMAT, MODEL_VERSION};
pub use tree::{fit_tree, Node, RegressionTree};

use crate::error::{Error, Result};
use crate::features::{RankingGroup, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub l2_leaf_reg: f64,
    /// Steepness of the pairwise logistic surrogate.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            l2_leaf_reg: 1.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_trees == 0 {
            problems.push("n_trees must be at least 1");
        }
        if self.max_depth == 0 {
            problems.push("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            problems.push("learning_rate must be in (0, 1]");
        }
        if !(self.l2_leaf_reg >= 0.0) {
            problems.push("l2_leaf_reg must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            problems.push("min_child_weight must be non-negative");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            problems.push("sigma must be positive");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

pub struct TrainOutput {
    pub model: GbdtModel,
    /// Training MAP after each boosting round.
    pub trace: Vec<f64>,
    pub n_groups: usize,
    pub n_skipped: usize,
}

/// Boosts `params.n_trees` trees on the groups that have both a positive and
/// a negative; other groups carry no ranking signal and are skipped.
pub fn train(groups: &[RankingGroup], params: &GbdtParams) -> Result<TrainOutput> {
    params.validate()?;
    let trainable: Vec<&RankingGroup> = groups.iter().filter(|g| g.is_trainable()).collect();
    if trainable.is_empty() {
        return Err(Error::invalid(
            "no trainable group: every group needs at least one positive and one negative candidate",
        ));
    }
    for g in &trainable {
        if g.features.ncols() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                found: g.features.ncols(),
            });
        }
    }

    let mut offsets = Vec::with_capacity(trainable.len() + 1);
    offsets.push(0);
    for g in &trainable {
        offsets.push(offsets.last().unwrap() + g.len());
    }
    let n_rows = *offsets.last().unwrap();
    let mut x = Array2::zeros((n_rows, NUM_FEATURES));
    for (g, w) in trainable.iter().zip(offsets.windows(2)) {
        x.slice_mut(s![w[0]..w[1], ..]).assign(&g.features);
    }
    let cols = tree::SortedColumns::new(x.view());

    let mut model = GbdtModel::new(*params);
    let mut scores = vec![model.base_score; n_rows];
    let mut trace = Vec::with_capacity(params.n_trees);
    let mut g = vec![0.0; n_rows];
    let mut h = vec![0.0; n_rows];

    for _round in 0..params.n_trees {
        let per_group: Vec<(Vec<f64>, Vec<f64>)> = trainable
            .par_iter()
            .zip(offsets.par_windows(2))
            .map(|(grp, w)| compute_lambdas(&scores[w[0]..w[1]], &grp.labels, params.sigma))
            .collect();
        for ((gg, hh), w) in per_group.into_iter().zip(offsets.windows(2)) {
            g[w[0]..w[1]].copy_from_slice(&gg);
            h[w[0]..w[1]].copy_from_slice(&hh);
        }

        let tree = tree::fit_sorted(&cols, &g, &h, params);
        for (r, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict(x.row(r));
        }
        model.trees.push(tree);

        let map = trainable
            .iter()
            .zip(offsets.windows(2))
            .map(|(grp, w)| average_precision(&ranked_labels(&grp.labels, &scores[w[0]..w[1]])))
            .sum::<f64>()
            / trainable.len() as f64;
        trace.push(map);
    }

    Ok(TrainOutput {
        model,
        trace,
        n_groups: trainable.len(),
        n_skipped: groups.len() - trainable.len(),
    })
}

/// Scores every row: `base_score + learning_rate · Σ tree(x)`, accumulated
/// tree by tree in training order.
pub fn predict(model: &GbdtModel, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    model.check_schema()?;
    if features.ncols() != NUM_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: NUM_FEATURES,
            found: features.ncols(),
        });
    }
    let lr = model.params.learning_rate;
    Ok(features
        .rows()
        .into_iter()
        .map(|row| {
            let mut s = model.base_score;
            for t in &model.trees {
                s += lr * t.predict(row);
            }
            s
        })
        .collect())
}

/// Scores for every group.
pub fn predict_groups(model: &GbdtModel, groups: &[RankingGroup]) -> Result<Vec<Vec<f64>>> {
    groups
        .par_iter()
        .map(|g| predict(model, g.features.view()))
        .collect()
}
