//! Synthetic datasets and client partitioning.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Batch, Matrix};
use crate::rng::{rng_for, tags, SimRng};

/// Fraction of every class kept for training; the rest is the test split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.len() != inputs.rows {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                inputs.rows,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::Config(format!("label {bad} outside [0, {class_count})")));
        }
        if !inputs.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite dataset input".into()));
        }
        Ok(Self { inputs, labels, class_count })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let cols = self.inputs.cols;
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(self.inputs.row(i));
        }
        Dataset {
            inputs: Matrix { rows: indices.len(), cols, data },
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Concatenate datasets that share input dimension and class count.
    pub fn concat<'a, I: IntoIterator<Item = &'a Dataset>>(parts: I) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Empty("no datasets to concatenate".into()))?;
        let mut out = first.clone();
        for part in iter {
            if part.input_dim() != out.input_dim() || part.class_count != out.class_count {
                return Err(Error::Shape("datasets have different layouts".into()));
            }
            out.inputs.data.extend_from_slice(&part.inputs.data);
            out.inputs.rows += part.inputs.rows;
            out.labels.extend_from_slice(&part.labels);
        }
        Ok(out)
    }

    pub fn to_batch(&self) -> Result<Batch> {
        Batch::new(self.inputs.clone(), self.labels.clone())
    }

    pub fn batch_of(&self, indices: &[usize]) -> Result<Batch> {
        let sub = self.subset(indices);
        Batch::new(sub.inputs, sub.labels)
    }

    /// Parse `x0,...,x{k-1},label` CSV text. The class count is one more than
    /// the largest label seen.
    pub fn from_csv_str(text: &str) -> Result<Dataset> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Empty("CSV dataset has no header".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let k = columns.len().saturating_sub(1);
        let expected: Vec<String> = (0..k).map(|i| format!("x{i}")).chain(["label".into()]).collect();
        if k == 0 || columns != expected {
            return Err(Error::Config(format!(
                "CSV header must be x0,...,x{{k-1}},label; got {header:?}"
            )));
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != k + 1 {
                return Err(Error::Shape(format!(
                    "CSV row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    k + 1
                )));
            }
            for f in &fields[..k] {
                data.push(f.parse::<f64>().map_err(|e| {
                    Error::Config(format!("CSV row {}: bad value {f:?}: {e}", lineno + 2))
                })?);
            }
            labels.push(fields[k].parse::<usize>().map_err(|e| {
                Error::Config(format!("CSV row {}: bad label {:?}: {e}", lineno + 2, fields[k]))
            })?);
        }
        if labels.is_empty() {
            return Err(Error::Empty("CSV dataset has no rows".into()));
        }
        let class_count = labels.iter().max().unwrap() + 1;
        let rows = labels.len();
        Dataset::new(Matrix::new(rows, k, data)?, labels, class_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
}

/// Per-class shuffled 80/20 split.
pub fn stratified_split(ds: &Dataset, seed: u64) -> SplitDataset {
    let mut rng = rng_for(seed, tags::DATA, &[1]);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for c in 0..ds.class_count {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * TRAIN_FRACTION).round() as usize;
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    SplitDataset { train: ds.subset(&train_idx), test: ds.subset(&test_idx) }
}

/// Gaussian blobs, one per class, split 80/20 by class.
///
/// Class means sit on distinct coordinate axes at radius `4 * spread / sqrt(2)`,
/// so every pair of means is exactly `4 * spread` apart. When there are more
/// classes than input dimensions the means are laid out on the first axis,
/// `4 * spread` apart.
pub fn gen_blobs(
    classes: usize,
    per_class: usize,
    input_dim: usize,
    spread: f64,
    seed: u64,
) -> Result<SplitDataset> {
    if classes < 2 {
        return Err(Error::Config("blobs need at least 2 classes".into()));
    }
    if per_class < 1 || input_dim < 1 {
        return Err(Error::Config("per_class and input_dim must be >= 1".into()));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::Config("spread must be > 0".into()));
    }
    let means = class_means(classes, input_dim, spread);
    let mut rng = rng_for(seed, tags::DATA, &[0]);
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(m + spread * z);
            }
            labels.push(c);
        }
    }
    let ds = Dataset::new(Matrix::new(n, input_dim, data)?, labels, classes)?;
    Ok(stratified_split(&ds, seed))
}

/// Class centres, pairwise `4 * max(spread, 1)` apart. The gap never shrinks
/// below 4, so the clusters separate as `spread` goes to zero.
pub fn class_means(classes: usize, input_dim: usize, spread: f64) -> Vec<Vec<f64>> {
    let gap = 4.0 * spread.max(1.0);
    (0..classes)
        .map(|c| {
            let mut m = vec![0.0; input_dim];
            if classes <= input_dim {
                m[c] = gap / std::f64::consts::SQRT_2;
            } else {
                m[0] = gap * c as f64;
            }
            m
        })
        .collect()
}

/// Disjoint per-client index lists into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub client_indices: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.client_indices.len()
    }

    pub fn shards(&self, ds: &Dataset) -> Vec<Dataset> {
        self.client_indices.iter().map(|idx| ds.subset(idx)).collect()
    }
}

/// Shuffle and deal contiguous near-equal shares (sizes differ by at most one).
pub fn partition_iid(ds: &Dataset, n: usize, seed: u64) -> Result<Partition> {
    if n == 0 || n > ds.len() {
        return Err(Error::Config(format!(
            "cannot split {} samples across {n} clients",
            ds.len()
        )));
    }
    let mut rng = rng_for(seed, tags::PARTITION, &[0]);
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut rng);
    let base = ds.len() / n;
    let extra = ds.len() % n;
    let mut client_indices = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        let mut shard = idx[start..start + size].to_vec();
        shard.sort_unstable();
        client_indices.push(shard);
        start += size;
    }
    Ok(Partition { client_indices })
}

const DIRICHLET_ATTEMPTS: usize = 100;

/// Label-skewed split: for every class, client shares are drawn from
/// `Dirichlet(alpha, ..., alpha)`. Draws that leave a client empty are
/// redrawn; if that keeps failing, empty clients take one sample from the
/// largest client.
pub fn partition_dirichlet(ds: &Dataset, n: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config("dirichlet alpha must be > 0".into()));
    }
    if n == 0 || n > ds.len() {
        return Err(Error::Config(format!(
            "cannot split {} samples across {n} clients",
            ds.len()
        )));
    }
    let mut rng = rng_for(seed, tags::PARTITION, &[1]);
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let by_class: Vec<Vec<usize>> = (0..ds.class_count)
        .map(|c| (0..ds.len()).filter(|&i| ds.labels[i] == c).collect())
        .collect();

    let mut clients = Vec::new();
    for _ in 0..DIRICHLET_ATTEMPTS {
        clients = dirichlet_draw(&by_class, n, &gamma, &mut rng);
        if clients.iter().all(|c| !c.is_empty()) {
            break;
        }
    }
    while let Some(empty) = clients.iter().position(Vec::is_empty) {
        let largest = (0..n).max_by_key(|&i| (clients[i].len(), std::cmp::Reverse(i))).unwrap();
        let moved = clients[largest].pop().unwrap();
        clients[empty].push(moved);
    }
    for c in &mut clients {
        c.sort_unstable();
    }
    Ok(Partition { client_indices: clients })
}

fn dirichlet_draw(
    by_class: &[Vec<usize>],
    n: usize,
    gamma: &Gamma<f64>,
    rng: &mut SimRng,
) -> Vec<Vec<usize>> {
    let mut clients = vec![Vec::new(); n];
    for members in by_class {
        let mut idx = members.clone();
        idx.shuffle(rng);
        let mut weights: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            // every gamma draw underflowed; give the class to one client
            let pick = rng.random_range(0..n);
            weights = (0..n).map(|i| if i == pick { 1.0 } else { 0.0 }).collect();
        }
        let k = idx.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (client, w) in weights.iter().enumerate() {
            cum += w;
            let end = if client + 1 == n { k } else { ((cum * k as f64).round() as usize).min(k) };
            let end = end.max(start);
            clients[client].extend_from_slice(&idx[start..end]);
            start = end;
        }
    }
    clients
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_partition(p: &Partition, total: usize) {
        let mut seen = vec![false; total];
        for shard in &p.client_indices {
            assert!(!shard.is_empty());
            for &i in shard {
                assert!(i < total);
                assert!(!seen[i], "index {i} assigned twice");
                seen[i] = true;
            }
        }
    }

    #[test]
    fn blobs_are_deterministic_and_stratified() {
        let a = gen_blobs(3, 50, 4, 1.0, 9).unwrap();
        let b = gen_blobs(3, 50, 4, 1.0, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_blobs(3, 50, 4, 1.0, 10).unwrap());
        assert_eq!(a.train.class_counts(), vec![40, 40, 40]);
        assert_eq!(a.test.class_counts(), vec![10, 10, 10]);
    }

    #[test]
    fn stratified_split_keeps_ratios_within_one() {
        let ds = gen_blobs(2, 37, 3, 1.0, 1).unwrap();
        for (c, &count) in ds.train.class_counts().iter().enumerate() {
            let expected = 37.0 * TRAIN_FRACTION;
            assert!((count as f64 - expected).abs() <= 1.0, "class {c}: {count}");
        }
    }

    #[test]
    fn class_means_are_four_spreads_apart() {
        for (classes, dim) in [(2, 20), (5, 3)] {
            let means = class_means(classes, dim, 1.5);
            for i in 0..classes {
                for j in i + 1..classes {
                    let d = crate::vector::sq_dist(&means[i], &means[j]).sqrt();
                    assert!(d >= 6.0 - 1e-12, "{classes} classes: {d}");
                }
            }
        }
    }

    #[test]
    fn tiny_spread_is_perfectly_separable_by_nearest_centroid() {
        let ds = gen_blobs(3, 40, 5, 1e-6, 4).unwrap();
        let means = class_means(3, 5, 1e-6);
        for (r, &y) in ds.test.labels.iter().enumerate() {
            let x = ds.test.inputs.row(r);
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    crate::vector::sq_dist(x, &means[a])
                        .total_cmp(&crate::vector::sq_dist(x, &means[b]))
                })
                .unwrap();
            assert_eq!(nearest, y);
        }
    }

    #[test]
    fn blob_preconditions() {
        assert!(gen_blobs(1, 10, 2, 1.0, 0).is_err());
        assert!(gen_blobs(2, 0, 2, 1.0, 0).is_err());
        assert!(gen_blobs(2, 10, 2, 0.0, 0).is_err());
    }

    #[test]
    fn iid_equal_shares() {
        let ds = gen_blobs(2, 63, 2, 1.0, 0).unwrap().train; // 100 rows
        assert_eq!(ds.len(), 100);
        let p = partition_iid(&ds, 10, 3).unwrap();
        assert!(p.client_indices.iter().all(|s| s.len() == 10));
        check_partition(&p, 100);
        assert_eq!(p.client_indices.iter().map(Vec::len).sum::<usize>(), 100);
        assert_eq!(p, partition_iid(&ds, 10, 3).unwrap());
    }

    #[test]
    fn iid_uneven_shares_differ_by_one() {
        let ds = gen_blobs(2, 13, 2, 1.0, 0).unwrap().train;
        let p = partition_iid(&ds, 7, 0).unwrap();
        let sizes: Vec<usize> = p.client_indices.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(partition_iid(&ds, ds.len() + 1, 0).is_err());
    }

    #[test]
    fn iid_class_balance() {
        // N = 1000 training rows, 10 clients, 2 classes.
        let ds = gen_blobs(2, 625, 2, 1.0, 5).unwrap().train;
        assert_eq!(ds.len(), 1000);
        let p = partition_iid(&ds, 10, 5).unwrap();
        for shard in p.shards(&ds) {
            let frac = shard.class_counts()[0] as f64 / shard.len() as f64;
            assert!((frac - 0.5).abs() <= 0.5 * 0.2, "class-0 share {frac}");
        }
    }

    #[test]
    fn dirichlet_concentrated_alpha_is_near_iid() {
        let ds = gen_blobs(2, 500, 2, 1.0, 2).unwrap().train;
        let p = partition_dirichlet(&ds, 10, 1e6, 2).unwrap();
        check_partition(&p, ds.len());
        for shard in p.shards(&ds) {
            assert!((shard.len() as i64 - 80).abs() <= 2);
            let frac = shard.class_counts()[0] as f64 / shard.len() as f64;
            assert!((frac - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn dirichlet_small_alpha_is_skewed() {
        let ds = gen_blobs(2, 500, 2, 1.0, 2).unwrap().train;
        let p = partition_dirichlet(&ds, 10, 0.1, 2).unwrap();
        check_partition(&p, ds.len());
        let skewed = p.shards(&ds).iter().any(|s| {
            let counts = s.class_counts();
            *counts.iter().max().unwrap() as f64 > 0.8 * s.len() as f64
        });
        assert!(skewed);
    }

    #[test]
    fn dirichlet_never_leaves_clients_empty() {
        let ds = gen_blobs(3, 20, 2, 1.0, 0).unwrap().train;
        for (alpha, seed) in [(0.01, 0), (0.05, 1), (0.5, 2), (5.0, 3), (0.001, 4)] {
            let p = partition_dirichlet(&ds, 12, alpha, seed).unwrap();
            check_partition(&p, ds.len());
            assert_eq!(p, partition_dirichlet(&ds, 12, alpha, seed).unwrap());
        }
        assert!(partition_dirichlet(&ds, 3, 0.0, 0).is_err());
    }

    #[test]
    fn csv_import() {
        let text = "x0,x1,label\n0.5,1.0,0\n-1,2,1\n3,4,2\n";
        let ds = Dataset::from_csv_str(text).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.class_count, 3);
        assert_eq!(ds.inputs.row(1), &[-1.0, 2.0]);
        assert!(Dataset::from_csv_str("a,b,label\n1,2,0\n").is_err());
        assert!(Dataset::from_csv_str("x0,label\n1,2,0\n").is_err());
    }
}
