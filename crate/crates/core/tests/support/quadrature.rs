//! Deterministic GMI reference by Gauss–Hermite quadrature over the noise.
//!
//! For each transmitted point and label position the expectation over
//! circular Gaussian noise is a 2-D integral against `exp(−t²)` weights,
//! evaluated on a tensor grid. Nodes and weights come from the
//! Golub–Welsch eigenvalue problem.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Nodes and weights for `∫ f(t) exp(−t²) dt`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    top + vals.map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Per-position GMI of `points` (label order, bit 0 = MSB) over complex
/// AWGN of total variance `sigma2`.
pub fn gmi_per_bit(points: &[Complex64], m: usize, sigma2: f64, nodes: usize) -> Vec<f64> {
    let (t, w) = gauss_hermite(nodes);
    let sigma = sigma2.sqrt();
    let big_m = points.len();
    let mut loss = vec![0.0; m];
    for (label, &x) in points.iter().enumerate() {
        for (a, wa) in t.iter().zip(&w) {
            for (b, wb) in t.iter().zip(&w) {
                let y = x + Complex64::new(sigma * a, sigma * b);
                let metric: Vec<f64> = points.iter().map(|p| -(y - p).norm_sqr() / sigma2).collect();
                let all = log_sum_exp(metric.iter().copied());
                for (i, l) in loss.iter_mut().enumerate() {
                    let bit = (label >> (m - 1 - i)) & 1;
                    let same = log_sum_exp(
                        metric
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| (k >> (m - 1 - i)) & 1 == bit)
                            .map(|(_, &v)| v),
                    );
                    *l += wa * wb / std::f64::consts::PI * (all - same) / std::f64::consts::LN_2;
                }
            }
        }
    }
    loss.into_iter().map(|l| 1.0 - l / big_m as f64).collect()
}
