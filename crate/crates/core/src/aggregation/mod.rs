//! Server-side aggregation rules: FedAvg and the robust defenses KRUM,
//! coordinate-wise Trimmed Mean and DOS (distance-based outlier suppression).
//!
//! All rules ignore `num_samples` and treat clients equally.

mod copod;

pub use copod::copod_scores;

use std::fmt;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::vector::{dot, sq_dist, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateKind {
    Parameters,
    Gradients,
}

impl fmt::Display for UpdateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateKind::Parameters => "parameters",
            UpdateKind::Gradients => "gradients",
        })
    }
}

/// One client's submission for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub kind: UpdateKind,
    pub vector: ParamVector,
    pub num_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutcome {
    pub aggregate: ParamVector,
    /// Per-client weights on the simplex (one-hot for KRUM).
    pub weights: Vec<f64>,
    /// Index (into the input list) of the update KRUM selected.
    pub selected: Option<usize>,
    /// Per-client scores: KRUM neighbour scores, DOS outlier scores.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Defense {
    FedAvg,
    /// `f` is the byzantine count KRUM assumes.
    Krum { f: usize },
    TrimmedMean { trim_k: usize },
    Dos,
}

impl Defense {
    pub fn name(&self) -> &'static str {
        match self {
            Defense::FedAvg => "fedavg",
            Defense::Krum { .. } => "krum",
            Defense::TrimmedMean { .. } => "trimmed_mean",
            Defense::Dos => "dos",
        }
    }

    pub fn aggregate(&self, updates: &[ClientUpdate]) -> Result<AggregationOutcome> {
        let vectors: Vec<&[f64]> = updates.iter().map(|u| u.vector.as_slice()).collect();
        if let Some(first) = updates.first() {
            if updates.iter().any(|u| u.kind != first.kind) {
                return Err(Error::Shape("mixed update kinds in one round".into()));
            }
        }
        match *self {
            Defense::FedAvg => fedavg(&vectors),
            Defense::Krum { f } => krum(&vectors, f),
            Defense::TrimmedMean { trim_k } => trimmed_mean(&vectors, trim_k),
            Defense::Dos => dos_aggregate(&vectors),
        }
    }
}

fn check_uniform(vectors: &[&[f64]]) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Empty("no updates to aggregate".into()))?;
    let d = first.len();
    if let Some(bad) = vectors.iter().position(|v| v.len() != d) {
        return Err(Error::Shape(format!(
            "update {bad} has length {}, expected {d}",
            vectors[bad].len()
        )));
    }
    Ok(d)
}

fn weighted_sum(vectors: &[&[f64]], weights: &[f64], d: usize) -> ParamVector {
    let mut out = ParamVector::zeros(d);
    for (v, &w) in vectors.iter().zip(weights) {
        out.axpy(w, v);
    }
    out
}

/// Unweighted mean of all updates.
pub fn fedavg(vectors: &[&[f64]]) -> Result<AggregationOutcome> {
    let d = check_uniform(vectors)?;
    let n = vectors.len();
    let mut aggregate = ParamVector::zeros(d);
    for v in vectors {
        aggregate.axpy(1.0, v);
    }
    let inv = 1.0 / n as f64;
    aggregate.iter_mut().for_each(|x| *x *= inv);
    Ok(AggregationOutcome {
        aggregate,
        weights: vec![inv; n],
        selected: None,
        scores: Vec::new(),
    })
}

/// Scores closer than this (relative) count as tied, so rounding noise in
/// otherwise equal scores cannot override the lowest-index rule.
pub const KRUM_TIE_RTOL: f64 = 1e-12;

/// KRUM: score every update by the summed squared distance to its
/// `n - f - 2` nearest neighbours and return the lowest-scoring one
/// (lowest index on ties).
pub fn krum(vectors: &[&[f64]], f: usize) -> Result<AggregationOutcome> {
    let d = check_uniform(vectors)?;
    let n = vectors.len();
    if n < f + 3 {
        return Err(Error::Config(format!(
            "KRUM needs n >= f + 3 (n = {n}, f = {f})"
        )));
    }
    let m = n - f - 2;
    let dist = pairwise(vectors, |a, b| sq_dist(a, b));
    let mut scores = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| dist[i * n + j]));
        row.sort_by(f64::total_cmp);
        scores.push(row[..m].iter().sum::<f64>());
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] - KRUM_TIE_RTOL * scores[best].abs() {
            best = i;
        }
    }
    let mut weights = vec![0.0; n];
    weights[best] = 1.0;
    let mut aggregate = ParamVector::zeros(d);
    aggregate.copy_from_slice(vectors[best]);
    Ok(AggregationOutcome { aggregate, weights, selected: Some(best), scores })
}

/// Coordinate-wise trimmed mean: per coordinate drop the `trim_k` smallest
/// and `trim_k` largest values and average the rest. The reported weight of a
/// client is the share of retained slots it filled across all coordinates.
pub fn trimmed_mean(vectors: &[&[f64]], trim_k: usize) -> Result<AggregationOutcome> {
    let d = check_uniform(vectors)?;
    let n = vectors.len();
    if 2 * trim_k >= n {
        return Err(Error::Config(format!(
            "trimmed mean needs 2 * trim_k < n (n = {n}, trim_k = {trim_k})"
        )));
    }
    let kept = n - 2 * trim_k;
    let mut aggregate = ParamVector::zeros(d);
    let mut retained = vec![0usize; n];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..d {
        // stable sort by value then client index keeps tie handling deterministic
        order.sort_by(|&a, &b| vectors[a][j].total_cmp(&vectors[b][j]).then(a.cmp(&b)));
        let mut acc = 0.0;
        for &i in &order[trim_k..n - trim_k] {
            acc += vectors[i][j];
            retained[i] += 1;
        }
        aggregate[j] = acc / kept as f64;
    }
    let slots = (d * kept).max(1) as f64;
    let weights = if d == 0 {
        vec![1.0 / n as f64; n]
    } else {
        retained.iter().map(|&r| r as f64 / slots).collect()
    };
    Ok(AggregationOutcome { aggregate, weights, selected: None, scores: Vec::new() })
}

/// `1 - cos(a, b)`; a zero vector is at distance 1 from any non-zero vector
/// and 0 from another zero vector.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => 1.0 - (dot(a, b) / (na * nb)).clamp(-1.0, 1.0),
    }
}

fn pairwise(vectors: &[&[f64]], metric: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let n = vectors.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = metric(vectors[i], vectors[j]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// DOS: COPOD scores over the rows of the pairwise Euclidean and cosine
/// distance matrices, averaged, then `softmax(-score)` as client weights.
pub fn dos_aggregate(vectors: &[&[f64]]) -> Result<AggregationOutcome> {
    let d = check_uniform(vectors)?;
    let n = vectors.len();
    if n < 3 {
        return Err(Error::Config(format!("DOS needs at least 3 updates, got {n}")));
    }
    let euclid = Matrix::new(n, n, pairwise(vectors, |a, b| sq_dist(a, b).sqrt()))?;
    let cosine = Matrix::new(n, n, pairwise(vectors, cosine_distance))?;
    let se = copod_scores(&euclid);
    let sc = copod_scores(&cosine);
    let scores: Vec<f64> = se.iter().zip(&sc).map(|(a, b)| 0.5 * (a + b)).collect();
    let weights = softmax_neg(&scores);
    let aggregate = weighted_sum(vectors, &weights, d);
    if !aggregate.is_finite() {
        return Err(Error::Numeric("non-finite DOS aggregate".into()));
    }
    Ok(AggregationOutcome { aggregate, weights, selected: None, scores })
}

fn softmax_neg(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = scores.iter().map(|s| (min - s).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}
