use nalgebra::DMatrix;
use ndarray::linalg::general_mat_mul;
use ndarray::Array2;

use crate::corpus::{normalize_rows, EmbeddingSpace, TranslationDictionary};
use crate::error::{Error, Result};

/// Orthogonal `W` minimizing `‖XW − Y‖_F` over the seed pairs, where rows of
/// `X` and `Y` are the paired source and target vectors. A source with
/// several gold targets contributes one row per target.
pub fn align_procrustes(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    seed: &TranslationDictionary,
) -> Result<Array2<f64>> {
    let d = src.dim();
    if tgt.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: tgt.dim(),
        });
    }
    if seed.is_empty() {
        return Err(Error::invalid("Procrustes alignment needs a non-empty seed dictionary"));
    }

    // M = XᵀY accumulated pair by pair
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (s, t) in seed.pairs() {
        let x = src.row(s);
        let y = tgt.row(t);
        for i in 0..d {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..d {
                m[(i, j)] += xi * y[j];
            }
        }
    }

    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::invalid("singular value decomposition did not converge")),
    };
    let w = u * v_t;
    Ok(Array2::from_shape_fn((d, d), |(i, j)| w[(i, j)]))
}

/// Maps every row through `w` (`x ↦ xW`). Normalized spaces are
/// renormalized afterwards to remove rounding drift.
pub fn apply_map(space: &EmbeddingSpace, w: &Array2<f64>) -> Result<EmbeddingSpace> {
    if w.nrows() != space.dim() || w.ncols() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: w.nrows(),
        });
    }
    let mut out = Array2::zeros((space.len(), space.dim()));
    general_mat_mul(1.0, &space.matrix, w, 0.0, &mut out);
    let mapped = EmbeddingSpace::new(space.vocab.clone(), out)?;
    Ok(if space.normalized {
        normalize_rows(mapped).0
    } else {
        mapped
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(m: Array2<f64>) -> EmbeddingSpace {
        let vocab = Vocabulary::from_words((0..m.nrows()).map(|i| format!("w{i}"))).unwrap();
        normalize_rows(EmbeddingSpace::new(vocab, m).unwrap()).0
    }

    fn identity_seed(n: usize) -> TranslationDictionary {
        (0..n).map(|i| (i, i)).collect()
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn identity_correspondence_gives_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = space(Array2::from_shape_fn((30, 5), |_| rng.random::<f64>() - 0.5));
        let w = align_procrustes(&s, &s, &identity_seed(30)).unwrap();
        assert!(max_abs(&(&w - &Array2::<f64>::eye(5))) < 1e-6);
    }

    #[test]
    fn recovers_a_random_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 8;
        let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        let q = Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)]);
        let s = space(Array2::from_shape_fn((40, d), |_| rng.random::<f64>() - 0.5));
        let t = apply_map(&s, &q).unwrap();
        let w = align_procrustes(&s, &t, &identity_seed(40)).unwrap();
        assert!(max_abs(&(&w - &q)) < 1e-5);
        let wtw = w.t().dot(&w);
        assert!(max_abs(&(&wtw - &Array2::<f64>::eye(d))) < 1e-5);
    }

    #[test]
    fn single_pair_in_2d_matches_angle_search() {
        let s = space(array![[0.6, 0.8]]);
        let t = space(array![[-0.28, 0.96]]);
        let w = align_procrustes(&s, &t, &identity_seed(1)).unwrap();
        let wtw = w.t().dot(&w);
        assert!(max_abs(&(&wtw - &Array2::<f64>::eye(2))) < 1e-9);

        let residual = |m: &Array2<f64>| {
            let xw = s.matrix.dot(m);
            (&xw - &t.matrix).iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        // brute force over rotations and reflections on a fine angle grid
        let mut best = f64::INFINITY;
        for step in 0..100_000 {
            let a = step as f64 * std::f64::consts::TAU / 100_000.0;
            let (sn, cs) = a.sin_cos();
            for m in [array![[cs, sn], [-sn, cs]], array![[cs, sn], [sn, -cs]]] {
                best = best.min(residual(&m));
            }
        }
        assert!(residual(&w) <= best + 1e-9);
    }

    #[test]
    fn errors_on_empty_seed_or_dimension_mismatch() {
        let a = space(array![[1.0, 0.0]]);
        let b = space(array![[1.0, 0.0, 0.0]]);
        assert!(align_procrustes(&a, &a, &TranslationDictionary::new()).is_err());
        assert!(matches!(
            align_procrustes(&a, &b, &identity_seed(1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
