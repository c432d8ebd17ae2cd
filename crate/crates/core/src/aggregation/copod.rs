//! Copula-based outlier scores (COPOD).
//!
//! For each column the left and right empirical tail probabilities of every
//! row are turned into negative log-likelihoods. Per column a row scores
//! `max(skew_tail, (left + right) / 2)`, where `skew_tail` is the left tail
//! for negatively skewed columns, the right tail for positively skewed ones
//! and `left + right` for columns with zero skewness. A row's outlier score is
//! the sum over columns. ECDF values are at least `1/n`, so scores are finite
//! and non-negative.

use crate::nn::Matrix;

/// Outlier score per row of `features` (higher = more outlying).
pub fn copod_scores(features: &Matrix) -> Vec<f64> {
    let n = features.rows;
    let mut scores = vec![0.0; n];
    if n == 0 {
        return scores;
    }
    let inv_n = 1.0 / n as f64;
    let mut column = vec![0.0; n];
    let mut sorted = vec![0.0; n];
    for j in 0..features.cols {
        for (i, v) in column.iter_mut().enumerate() {
            *v = features.data[i * features.cols + j];
        }
        sorted.copy_from_slice(&column);
        sorted.sort_by(f64::total_cmp);
        let skew = skewness(&column);
        for (i, &x) in column.iter().enumerate() {
            let at_most = sorted.partition_point(|&v| v <= x);
            let below = sorted.partition_point(|&v| v < x);
            let left = -(at_most as f64 * inv_n).ln();
            let right = -((n - below) as f64 * inv_n).ln();
            let skew_tail = if skew < 0.0 {
                left
            } else if skew > 0.0 {
                right
            } else {
                left + right
            };
            scores[i] += skew_tail.max(0.5 * (left + right));
        }
    }
    scores
}

/// Population (biased) sample skewness; zero for constant columns.
pub(crate) fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 <= 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}
