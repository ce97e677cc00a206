//! Sequential minimal optimization for the RBF-kernel SVM dual.
//!
//! Full working-set scan with first-order maximal-violating-pair
//! selection; index order breaks ties, so training is deterministic.

use crate::error::{Error, Result};

/// RBF kernel `exp(-gamma ||a - b||^2)`.
#[inline]
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dist_sq: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
    (-gamma * dist_sq).exp()
}

pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

/// Solves the dual `max sum(a) - 1/2 sum a_i a_j y_i y_j K_ij` subject to
/// `0 <= a <= C`, `sum a_i y_i = 0`, stopping when the largest KKT
/// violation pair gap drops to `tol`.
pub fn solve(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
    max_passes: usize,
) -> Result<SmoSolution> {
    let n = x.len();
    assert_eq!(n, y.len());

    // Full kernel matrix; training sets here are desk-scale.
    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf_kernel(&x[i], &x[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let mut alpha = vec![0.0f64; n];
    // Functional margin F_i = sum_j a_j y_j K_ij, zero at the start.
    let mut f = vec![0.0f64; n];

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0usize;
    let bias;
    loop {
        // Maximal violating pair, first index on ties.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = None;
        let mut low_val = f64::INFINITY;
        let mut low_idx = None;
        for i in 0..n {
            let v = y[i] - f[i];
            if in_up(alpha[i], y[i]) && v > m_val {
                m_val = v;
                m_idx = Some(i);
            }
            if in_low(alpha[i], y[i]) && v < low_val {
                low_val = v;
                low_idx = Some(i);
            }
        }
        let (Some(i1), Some(i2)) = (m_idx, low_idx) else {
            bias = 0.0;
            break;
        };
        if m_val - low_val <= tol || iterations >= max_passes {
            bias = (m_val + low_val) / 2.0;
            break;
        }
        iterations += 1;

        // Platt-style pair update with i1 driving i2.
        let (y1, y2) = (y[i1], y[i2]);
        let (a1_old, a2_old) = (alpha[i1], alpha[i2]);
        let e1 = f[i1] - y1;
        let e2 = f[i2] - y2;
        let s = y1 * y2;
        let (lo, hi) = if (y1 - y2).abs() > 0.5 {
            ((a2_old - a1_old).max(0.0), (c + a2_old - a1_old).min(c))
        } else {
            ((a2_old + a1_old - c).max(0.0), (a2_old + a1_old).min(c))
        };
        let k11 = kernel[i1 * n + i1];
        let k22 = kernel[i2 * n + i2];
        let k12 = kernel[i1 * n + i2];
        let eta = k11 + k22 - 2.0 * k12;

        let a2 = if eta > 1e-12 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Flat direction: evaluate the objective at both bounds.
            let obj = |a2v: f64| {
                let a1v = a1_old + s * (a2_old - a2v);
                let d1 = a1v - a1_old;
                let d2 = a2v - a2_old;
                // Change in the (minimized) objective along the pair.
                0.5 * (d1 * d1 * k11 + d2 * d2 * k22) + s * d1 * d2 * k12
                    + d1 * (y1 * e1)
                    + d2 * (y2 * e2)
            };
            if obj(lo) <= obj(hi) {
                lo
            } else {
                hi
            }
        };
        if (a2 - a2_old).abs() < 1e-14 {
            bias = (m_val + low_val) / 2.0;
            break;
        }
        let a1 = a1_old + s * (a2_old - a2);
        alpha[i1] = a1;
        alpha[i2] = a2;

        let d1 = (a1 - a1_old) * y1;
        let d2 = (a2 - a2_old) * y2;
        for k in 0..n {
            f[k] += d1 * kernel[i1 * n + k] + d2 * kernel[i2 * n + k];
        }
    }

    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("SMO produced non-finite alphas".into()));
    }
    // f(x) = sum a_i y_i K(x, x_i) + b with b = (m + M) / 2 oriented
    // for that sign convention.
    Ok(SmoSolution { alpha, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dual_objective(x: &[Vec<f64>], y: &[f64], alpha: &[f64], gamma: f64) -> f64 {
        let n = x.len();
        let mut obj = alpha.iter().sum::<f64>();
        for i in 0..n {
            if alpha[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if alpha[j] == 0.0 {
                    continue;
                }
                obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * rbf_kernel(&x[i], &x[j], gamma);
            }
        }
        obj
    }

    #[test]
    fn two_point_problem_matches_grid_search() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![-1.0, 1.0];
        let (c, gamma) = (10.0, 1.0);
        let sol = solve(&x, &y, c, gamma, 1e-6, 10_000).unwrap();

        // Equality constraint forces a1 = a2 = a; brute-force the scalar.
        let mut best = f64::NEG_INFINITY;
        for step in 0..=100_000 {
            let a = c * step as f64 / 100_000.0;
            let alpha = vec![a, a];
            best = best.max(dual_objective(&x, &y, &alpha, gamma));
        }
        let got = dual_objective(&x, &y, &sol.alpha, gamma);
        assert!(got >= best - 1e-4, "smo {got} vs grid {best}");

        // Decision values are sign-correct on both points.
        for (xi, yi) in x.iter().zip(&y) {
            let score: f64 = x
                .iter()
                .zip(&y)
                .zip(&sol.alpha)
                .map(|((xj, yj), aj)| aj * yj * rbf_kernel(xi, xj, gamma))
                .sum::<f64>()
                + sol.bias;
            assert!(score * yi > 0.0, "point {xi:?} score {score}");
        }
    }

    #[test]
    fn xor_is_fit_perfectly() {
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = vec![-1.0, 1.0, 1.0, -1.0];
        let sol = solve(&x, &y, 10.0, 1.0, 1e-6, 10_000).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let score: f64 = x
                .iter()
                .zip(&y)
                .zip(&sol.alpha)
                .map(|((xj, yj), aj)| aj * yj * rbf_kernel(xi, xj, 1.0))
                .sum::<f64>()
                + sol.bias;
            assert!(score * yi > 0.0, "xor point {xi:?} misclassified");
        }
    }

    #[test]
    fn constraints_hold_at_convergence() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let c = 2.5;
        let sol = solve(&x, &y, c, 0.7, 1e-4, 100_000).unwrap();
        let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(sum.abs() < 1e-6, "sum alpha y = {sum}");
        for &a in &sol.alpha {
            assert!((-1e-12..=c + 1e-12).contains(&a));
        }
    }
}
