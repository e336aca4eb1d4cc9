//! Nonnegative least squares (Lawson-Hanson active set) over a Gram matrix.

use super::feasibility::solve_spd;

/// Minimizes `‖Σ w_j a_j - y‖²` over `w ≥ 0`, given the Gram matrix
/// `G_ij = ⟨a_i, a_j⟩` and the correlations `c_j = ⟨a_j, y⟩`.
pub fn nnls_gram(gram: &[Vec<f64>], corr: &[f64]) -> Vec<f64> {
    let n = corr.len();
    let mut w = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = corr.iter().map(|c| c.abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-13 * scale;

    let gradient = |w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| corr[i] - (0..n).map(|j| gram[i][j] * w[j]).sum::<f64>())
            .collect()
    };

    for _outer in 0..3 * n + 10 {
        let g = gradient(&w);
        let Some(j) = (0..n)
            .filter(|&j| !passive[j] && g[j] > tol)
            .max_by(|&a, &b| g[a].total_cmp(&g[b]))
        else {
            break;
        };
        passive[j] = true;
        let mut entered = true;
        for _inner in 0..3 * n + 10 {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&k| gram[i][k]).collect()).collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| corr[i]).collect();
            let Some(s) = solve_spd(&sub, &rhs) else {
                // degenerate column: drop it
                if entered {
                    passive[j] = false;
                }
                break;
            };
            entered = false;
            if s.iter().all(|&v| v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    w[i] = s[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &i) in idx.iter().enumerate() {
                if s[k] <= 0.0 {
                    let denom = w[i] - s[k];
                    if denom > 0.0 {
                        alpha = alpha.min(w[i] / denom);
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                w[i] += alpha * (s[k] - w[i]);
                if w[i] <= 1e-15 * (1.0 + s[k].abs()) {
                    w[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    w
}
