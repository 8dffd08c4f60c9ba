use super::metrics::{rank_order, ApSwap};

/// Lambda gradients and hessians of one group for the MAP objective.
///
/// For every pair with `label_i > label_j`,
/// `ρ = 1 / (1 + exp(σ(s_i − s_j)))` and `w = |ΔAP_ij|` at the current
/// ranking; `g_i −= σρw`, `g_j += σρw`, and both hessians gain `σ²ρ(1−ρ)w`.
/// Boosting minimizes, so positives receive negative gradient.
pub fn compute_lambdas(scores: &[f64], labels: &[u8], sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let n = scores.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return (g, h);
    }

    let order = rank_order(scores);
    let mut position = vec![0usize; n];
    for (p, &item) in order.iter().enumerate() {
        position[item] = p;
    }
    let ranked: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
    let swap = ApSwap::new(&ranked);

    for i in (0..n).filter(|&i| labels[i] == 1) {
        for j in (0..n).filter(|&j| labels[j] == 0) {
            let w = swap.delta(position[i], position[j]).abs();
            if w == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lambda = sigma * rho * w;
            let hess = sigma * sigma * rho * (1.0 - rho) * w;
            g[i] -= lambda;
            g[j] += lambda;
            h[i] += hess;
            h[j] += hess;
        }
    }
    (g, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_labels_give_zero() {
        let (g, h) = compute_lambdas(&[0.3, 0.1, 0.2], &[1, 1, 1], 1.0);
        assert!(g.iter().chain(&h).all(|&v| v == 0.0));
        let (g, h) = compute_lambdas(&[0.3, 0.1], &[0, 0], 1.0);
        assert!(g.iter().chain(&h).all(|&v| v == 0.0));
    }

    #[test]
    fn single_pair_hand_values() {
        let (g, h) = compute_lambdas(&[0.0, 0.0], &[1, 0], 1.0);
        assert_eq!(g, vec![-0.25, 0.25]);
        assert_eq!(h, vec![0.125, 0.125]);
    }
}
