//! Fixtures shared by the benchmarks.

use lfbb_core::{RankingGroup, NUM_FEATURES};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ranking groups with one positive per group whose fourth column is a
/// noisy signal of the label. The rest is uniform noise.
pub fn ranking_groups(n_groups: usize, n_cands: usize, seed: u64) -> Vec<RankingGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_groups)
        .map(|src| {
            let pos = rng.random_range(0..n_cands);
            let labels: Vec<u8> = (0..n_cands).map(|i| u8::from(i == pos)).collect();
            let mut features = Array2::zeros((n_cands, NUM_FEATURES));
            for i in 0..n_cands {
                for j in 0..4 {
                    features[[i, j]] = rng.random::<f64>();
                }
                if i == pos {
                    features[[i, 3]] += 0.5;
                }
            }
            RankingGroup {
                src,
                candidates: (0..n_cands).collect(),
                labels,
                csls: features.column(0).to_vec(),
                features,
                gold_missed: false,
            }
        })
        .collect()
}
