//! A small multilayer perceptron with a rectifier on hidden layers and a
//! softmax cross-entropy head.
//!
//! Parameters are stored flat, layer-major: for each layer in order, the
//! weight matrix (`out x in`, row-major) followed by the bias vector (`out`).
//! A layer mapping `in -> out` therefore occupies `(in + 1) * out` entries.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_for, tags};
use crate::vector::ParamVector;

/// Layer widths `[input, hidden..., classes]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    layer_sizes: Vec<usize>,
}

impl ModelSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "model needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be >= 1".into()));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Parameter dimension `d = sum (in_i + 1) * out_i`.
    pub fn param_dim(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// `(weight_offset, bias_offset, fan_in, fan_out)` for layer `l`.
    fn layer_layout(&self, l: usize) -> (usize, usize, usize, usize) {
        let offset: usize = self.layer_sizes[..=l]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum();
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (offset, offset + fan_in * fan_out, fan_in, fan_out)
    }
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// A labelled minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows == 0 {
            return Err(Error::Empty("batch has no rows".into()));
        }
        if labels.len() != inputs.rows {
            return Err(Error::Shape(format!(
                "{} input rows but {} labels",
                inputs.rows,
                labels.len()
            )));
        }
        if !inputs.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite batch input".into()));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Sign applied to the mean cross-entropy. Honest clients minimise `+CE`,
/// the malicious proxy model minimises `-CE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSign {
    Minimize,
    Maximize,
}

impl LossSign {
    pub fn factor(self) -> f64 {
        match self {
            LossSign::Minimize => 1.0,
            LossSign::Maximize => -1.0,
        }
    }
}

/// A model: its architecture plus a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    spec: ModelSpec,
    params: ParamVector,
}

impl ModelState {
    /// He-style init: weights `N(0, 1) / sqrt(fan_in)`, biases zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = rng_for(seed, tags::INIT, &[]);
        let mut params = ParamVector::zeros(spec.param_dim());
        for l in 0..spec.num_layers() {
            let (w_off, b_off, fan_in, _) = spec.layer_layout(l);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for w in &mut params[w_off..b_off] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * scale;
            }
        }
        Self { spec: spec.clone(), params }
    }

    /// Rebuild a model from a flat vector (inverse of [`ModelState::flatten`]).
    pub fn from_params(spec: &ModelSpec, params: ParamVector) -> Result<Self> {
        if params.len() != spec.param_dim() {
            return Err(Error::Shape(format!(
                "model needs {} parameters, got {}",
                spec.param_dim(),
                params.len()
            )));
        }
        Ok(Self { spec: spec.clone(), params })
    }

    pub fn flatten(&self) -> ParamVector {
        self.params.clone()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    /// `(weights, bias)` slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w_off, b_off, _, fan_out) = self.spec.layer_layout(l);
        (&self.params[w_off..b_off], &self.params[b_off..b_off + fan_out])
    }

    /// Pre-activations of every layer; the last entry holds the logits.
    fn forward_all(&self, inputs: &Matrix) -> Result<Vec<Matrix>> {
        if inputs.cols != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "model expects input dim {}, batch has {}",
                self.spec.input_dim(),
                inputs.cols
            )));
        }
        let num_layers = self.spec.num_layers();
        let mut pre = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let (weights, bias) = self.layer(l);
            let prev = if l == 0 { inputs } else { &pre[l - 1] };
            let (fan_in, fan_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
            let mut z = Matrix::zeros(inputs.rows, fan_out);
            for r in 0..inputs.rows {
                let x = prev.row(r);
                let out = z.row_mut(r);
                for (o, out_v) in out.iter_mut().enumerate() {
                    let w_row = &weights[o * fan_in..(o + 1) * fan_in];
                    let mut acc = bias[o];
                    for (w, &xv) in w_row.iter().zip(x) {
                        // hidden activations are rectified on read
                        let a = if l == 0 { xv } else { xv.max(0.0) };
                        acc += w * a;
                    }
                    *out_v = acc;
                }
            }
            pre.push(z);
        }
        Ok(pre)
    }

    pub fn forward_logits(&self, inputs: &Matrix) -> Result<Matrix> {
        let mut pre = self.forward_all(inputs)?;
        let logits = pre.pop().unwrap();
        if !logits.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        Ok(logits)
    }

    /// Signed mean cross-entropy over the batch and its exact gradient with
    /// respect to the flat parameter vector.
    pub fn loss_and_grad(&self, batch: &Batch, sign: LossSign) -> Result<(f64, ParamVector)> {
        let pre = self.forward_all(&batch.inputs)?;
        let num_layers = self.spec.num_layers();
        let classes = self.spec.num_classes();
        let rows = batch.len();
        let scale = sign.factor() / rows as f64;

        let logits = &pre[num_layers - 1];
        let mut delta = Matrix::zeros(rows, classes);
        let mut loss = 0.0;
        for r in 0..rows {
            let z = logits.row(r);
            let y = batch.labels[r];
            if y >= classes {
                return Err(Error::Shape(format!("label {y} out of range for {classes} classes")));
            }
            let lse = log_sum_exp(z);
            loss += lse - z[y];
            let d = delta.row_mut(r);
            for (c, dv) in d.iter_mut().enumerate() {
                let p = (z[c] - lse).exp();
                *dv = scale * (p - if c == y { 1.0 } else { 0.0 });
            }
        }
        let loss = sign.factor() * loss / rows as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }

        let mut grad = ParamVector::zeros(self.spec.param_dim());
        for l in (0..num_layers).rev() {
            let (w_off, b_off, fan_in, fan_out) = self.spec.layer_layout(l);
            let weights = &self.params[w_off..b_off];
            let prev = if l == 0 { &batch.inputs } else { &pre[l - 1] };
            let mut prev_delta = (l > 0).then(|| Matrix::zeros(rows, fan_in));
            for r in 0..rows {
                let d = delta.row(r);
                let x = prev.row(r);
                for o in 0..fan_out {
                    let dv = d[o];
                    if dv == 0.0 {
                        continue;
                    }
                    grad[b_off + o] += dv;
                    let g_row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    for (g, &xv) in g_row.iter_mut().zip(x) {
                        let a = if l == 0 { xv } else { xv.max(0.0) };
                        *g += dv * a;
                    }
                }
                if let Some(pd) = prev_delta.as_mut() {
                    let pd_row = pd.row_mut(r);
                    for (i, pdv) in pd_row.iter_mut().enumerate() {
                        if x[i] <= 0.0 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for o in 0..fan_out {
                            acc += d[o] * weights[o * fan_in + i];
                        }
                        *pdv = acc;
                    }
                }
            }
            if let Some(pd) = prev_delta {
                delta = pd;
            }
        }
        if !grad.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok((loss, grad))
    }

    /// Signed mean cross-entropy without the gradient.
    pub fn loss(&self, batch: &Batch, sign: LossSign) -> Result<f64> {
        let logits = self.forward_logits(&batch.inputs)?;
        let mut total = 0.0;
        for (r, &y) in batch.labels.iter().enumerate() {
            let z = logits.row(r);
            total += log_sum_exp(z) - z[y];
        }
        Ok(sign.factor() * total / batch.len() as f64)
    }

    /// Row-wise log-softmax of the logits.
    pub fn log_probabilities(&self, inputs: &Matrix) -> Result<Matrix> {
        let mut logits = self.forward_logits(inputs)?;
        for r in 0..logits.rows {
            let row = logits.row_mut(r);
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        Ok(logits)
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, lr }
    }

    pub fn adam(lr: f64) -> Self {
        Self { kind: OptimizerKind::adam(), lr }
    }
}

/// Optimizer with its moment buffers. One instance lives for one client's
/// local training in one round.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u32,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, dim: usize) -> Self {
        let (first, second) = match config.kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (vec![0.0; dim], vec![0.0; dim]),
        };
        Self { config, first, second, steps: 0 }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() {
            return Err(Error::Shape(format!(
                "gradient has {} entries, parameters {}",
                grad.len(),
                params.len()
            )));
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => params.axpy(-lr, grad),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.steps += 1;
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (i, (w, &g)) in params.iter_mut().zip(grad).enumerate() {
                    let m = &mut self.first[i];
                    let v = &mut self.second[i];
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
