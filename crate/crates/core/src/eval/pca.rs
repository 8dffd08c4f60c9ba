use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Projects mean-centered rows onto the top two principal components.
///
/// Each component's sign is fixed so that its largest-magnitude loading is
/// positive (lowest index on ties).
pub fn pca_project(vectors: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (m, d) = vectors.dim();
    if d < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 dimensions, got {d}")));
    }
    if m < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 points, got {m}")));
    }
    let mean = vectors.mean_axis(ndarray::Axis(0)).expect("m >= 2");
    let centered = DMatrix::from_fn(m, d, |i, j| vectors[[i, j]] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::invalid("singular value decomposition did not converge"))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut out = Array2::zeros((m, 2));
    for (c, &k) in order.iter().take(2).enumerate() {
        let mut axis: Vec<f64> = v_t.row(k).iter().copied().collect();
        let lead = axis
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv.abs() { (i, *v) } else { (bi, bv) });
        if lead.1 < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..m {
            out[[i, c]] = (0..d).map(|j| centered[(i, j)] * axis[j]).sum();
        }
    }
    Ok(out)
}
