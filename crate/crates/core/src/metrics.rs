//! ROC-AUC via the Mann-Whitney rank statistic.

use log::warn;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Binary ROC-AUC: `(concordant + 0.5 * tied) / (pos * neg)`.
///
/// Sorts once and walks groups of tied scores, so it runs in `O(N log N)`.
pub fn roc_auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(format!(
            "{positives} positives and {negatives} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Credit accumulates in half-units so the sum stays an exact integer.
    let mut negatives_below: u64 = 0;
    let mut half_credit: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos_tied, mut neg_tied) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos_tied += 1;
            } else {
                neg_tied += 1;
            }
            j += 1;
        }
        half_credit += 2 * pos_tied * negatives_below + pos_tied * neg_tied;
        negatives_below += neg_tied;
        i = j;
    }
    Ok(half_credit as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Macro one-vs-rest AUC: the unweighted mean of per-class binary AUCs, with
/// column `c` of `scores` as the score for class `c`. Classes missing from
/// `labels` (or covering every row) are skipped.
pub fn macro_ovr_auc(scores: &Matrix, labels: &[usize]) -> Result<f64> {
    if scores.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows but {} labels",
            scores.rows,
            labels.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    let mut column = vec![0.0; scores.rows];
    for c in 0..scores.cols {
        let is_c: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        for (r, v) in column.iter_mut().enumerate() {
            *v = scores.data[r * scores.cols + c];
        }
        match roc_auc_binary(&column, &is_c) {
            Ok(auc) => {
                total += auc;
                used += 1;
            }
            Err(Error::UndefinedAuc(why)) => warn!("class {c} skipped in macro AUC: {why}"),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::UndefinedAuc("no class has both positives and negatives".into()));
    }
    Ok(total / used as f64)
}
