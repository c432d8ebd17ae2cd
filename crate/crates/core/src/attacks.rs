//! The attacker. It controls `f` clients, sees their honest updates and
//! training data, and produces one malicious update that every controlled
//! client submits.
//!
//! Distance conventions: the DISBELIEVE thresholds (`P_dist`, `G_dist`) and
//! the achieved distances are squared Euclidean; Min-Max works with plain
//! Euclidean distances.

use rand_distr::{Distribution, Normal};

use crate::aggregation::UpdateKind;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{LossSign, ModelSpec, ModelState};
use crate::rng::{rng_for, tags};
use crate::train::{train_minibatch, StepControl, TrainConfig};
use crate::vector::{sq_dist, ParamVector};

/// Search interval and tolerance of the scaling-factor bisection.
pub const SF_START: f64 = 0.001;
pub const SF_END: f64 = 1000.0;
pub const SF_TOLERANCE: f64 = 0.01;

/// Search interval and tolerance of the Min-Max `gamma` bisection.
pub const GAMMA_MAX: f64 = 1000.0;
pub const GAMMA_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MinMaxDirection {
    /// `-mu / |mu|`
    InverseUnit,
    /// `-sigma` (coordinate-wise standard deviation)
    NegativeStd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    None,
    Disbelieve,
    Lie { z: f64 },
    MinMax { direction: MinMaxDirection },
    Noise { sigma: f64 },
    Scale { lambda: f64 },
    LabelFlip,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Disbelieve => "disbelieve",
            AttackKind::Lie { .. } => "lie",
            AttackKind::MinMax { .. } => "min_max",
            AttackKind::Noise { .. } => "noise",
            AttackKind::Scale { .. } => "scale",
            AttackKind::LabelFlip => "label_flip",
        }
    }
}

/// What the attacker knows in one round.
#[derive(Debug, Clone)]
pub struct AttackContext {
    /// Honest local results (parameters or gradients) of the controlled clients.
    pub malicious_updates: Vec<ParamVector>,
    /// Final local parameters of the controlled clients.
    pub malicious_params: Vec<ParamVector>,
    /// Training data of all controlled clients, concatenated.
    pub combined_data: Dataset,
    pub mode: UpdateKind,
    pub model: ModelSpec,
}

impl AttackContext {
    fn check(&self) -> Result<()> {
        let f = self.malicious_updates.len();
        if f < 2 {
            return Err(Error::Config(format!(
                "attacker needs at least 2 controlled clients, has {f}"
            )));
        }
        if self.malicious_params.len() != f {
            return Err(Error::Shape(format!(
                "{f} updates but {} parameter vectors",
                self.malicious_params.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackDiagnostics {
    pub mu_param_norm: f64,
    pub mu_grad_norm: Option<f64>,
    /// `P_dist` (parameter mode) or `G_dist` (gradient mode).
    pub threshold: f64,
    pub achieved_sq_dist: f64,
    /// Scaling factor (gradient attack only).
    pub sf: Option<f64>,
    pub fallback_used: bool,
    pub training_steps: usize,
}

/// Hyperparameters and seed of the malicious proxy model's training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaliciousTraining {
    pub train: TrainConfig,
    pub seed: u64,
}

/// Elementwise means of the controlled clients' parameters and (in gradient
/// mode) gradients.
pub fn malicious_means(ctx: &AttackContext) -> Result<(ParamVector, Option<ParamVector>)> {
    ctx.check()?;
    let mu_param = ParamVector::mean_of(&ctx.malicious_params)?;
    let mu_grad = match ctx.mode {
        UpdateKind::Parameters => None,
        UpdateKind::Gradients => Some(ParamVector::mean_of(&ctx.malicious_updates)?),
    };
    Ok((mu_param, mu_grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

/// Largest or smallest squared Euclidean distance over all unordered pairs.
pub fn pairwise_extreme_sqdist(vectors: &[ParamVector], which: Extreme) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::Config(format!(
            "pairwise distance needs >= 2 vectors, got {}",
            vectors.len()
        )));
    }
    let mut best = match which {
        Extreme::Max => f64::NEG_INFINITY,
        Extreme::Min => f64::INFINITY,
    };
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let d = vectors[i].sq_dist(&vectors[j]);
            best = match which {
                Extreme::Max => best.max(d),
                Extreme::Min => best.min(d),
            };
        }
    }
    Ok(best)
}

/// DISBELIEVE on parameters.
///
/// Starts the proxy model at `mu_param` and runs gradient ascent on the
/// classification loss over the combined malicious data. After each step the
/// squared distance to `mu_param` is checked against
/// `P_dist = max_{i != k} |W_i - W_k|^2`; the first step that leaves the ball
/// is undone and training stops. The result is always inside the ball.
pub fn disbelieve_params(
    ctx: &AttackContext,
    cfg: &MaliciousTraining,
) -> Result<(ParamVector, AttackDiagnostics)> {
    let (mu_param, _) = malicious_means(ctx)?;
    if ctx.combined_data.is_empty() {
        return Err(Error::Empty("attacker has no training data".into()));
    }
    let p_dist = pairwise_extreme_sqdist(&ctx.malicious_params, Extreme::Max)?;
    let mut model = ModelState::from_params(&ctx.model, mu_param.clone())?;
    let mut rng = rng_for(cfg.seed, tags::ATTACK_TRAIN, &[]);
    let stats = train_minibatch(
        &mut model,
        &ctx.combined_data,
        &cfg.train,
        LossSign::Maximize,
        &mut rng,
        |m| {
            if m.params().sq_dist(&mu_param) > p_dist {
                StepControl::RevertAndStop
            } else {
                StepControl::Continue
            }
        },
    )?;
    let out = model.into_params();
    let achieved = out.sq_dist(&mu_param);
    debug_assert!(achieved <= p_dist);
    Ok((
        out,
        AttackDiagnostics {
            mu_param_norm: mu_param.norm(),
            mu_grad_norm: None,
            threshold: p_dist,
            achieved_sq_dist: achieved,
            sf: None,
            fallback_used: false,
            training_steps: stats.steps,
        },
    ))
}

/// DISBELIEVE on gradients.
///
/// Starts the proxy model at `mu_param`, trains it by gradient ascent without
/// a distance check, takes the gradient of the ascent loss `-CE` at the final
/// model over all combined data, normalizes it and scales it with
/// [`binary_search_scale`] against `G_dist = min_{i != k} |G_i - G_k|^2`.
///
/// A zero final gradient cannot be normalized and yields
/// [`Error::DegenerateAttack`].
pub fn disbelieve_grads(
    ctx: &AttackContext,
    cfg: &MaliciousTraining,
) -> Result<(ParamVector, AttackDiagnostics)> {
    let (mu_param, mu_grad) = malicious_means(ctx)?;
    let mu_grad = mu_grad
        .ok_or_else(|| Error::Config("gradient attack needs gradient-mode updates".into()))?;
    if ctx.combined_data.is_empty() {
        return Err(Error::Empty("attacker has no training data".into()));
    }
    let g_dist = pairwise_extreme_sqdist(&ctx.malicious_updates, Extreme::Min)?;
    let mut model = ModelState::from_params(&ctx.model, mu_param.clone())?;
    let mut rng = rng_for(cfg.seed, tags::ATTACK_TRAIN, &[]);
    let stats = train_minibatch(
        &mut model,
        &ctx.combined_data,
        &cfg.train,
        LossSign::Maximize,
        &mut rng,
        |_| StepControl::Continue,
    )?;
    let (_, grad) = model.loss_and_grad(&ctx.combined_data.to_batch()?, LossSign::Maximize)?;
    let norm = grad.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateAttack(format!(
            "malicious gradient norm is {norm}"
        )));
    }
    let g_hat = grad.scaled(1.0 / norm);
    let search = binary_search_scale(&g_hat, &mu_grad, g_dist)?;
    let out = g_hat.scaled(search.sf);
    Ok((
        out,
        AttackDiagnostics {
            mu_param_norm: mu_param.norm(),
            mu_grad_norm: Some(mu_grad.norm()),
            threshold: g_dist,
            achieved_sq_dist: search.diff,
            sf: Some(search.sf),
            fallback_used: search.fallback_used,
            training_steps: stats.steps,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSearch {
    pub sf: f64,
    /// `|sf * g_hat - mu_grad|^2`
    pub diff: f64,
    /// Midpoint the loop stopped on, whether or not it was feasible.
    pub last_midpoint: f64,
    pub iterations: u32,
    pub fallback_used: bool,
}

/// Bisection for the scaling factor of the unit malicious gradient.
///
/// `start = 0.001`, `end = 1000`; while `|start - end| > 0.01` take the
/// midpoint `sf`, compute `diff = |sf * g_hat - mu_grad|^2` and move `start`
/// up when `diff > g_dist`, otherwise move `end` down.
///
/// The result is the last midpoint if it is feasible, else the last feasible
/// midpoint visited (the final `end`). Because `diff` is a parabola in `sf`,
/// the loop can also never visit a feasible point; then `sf` becomes the
/// parabola's minimizer `<g_hat, mu_grad>` clamped to `[0.001, 1000]` and
/// `fallback_used` is set.
pub fn binary_search_scale(g_hat: &[f64], mu_grad: &[f64], g_dist: f64) -> Result<ScaleSearch> {
    if g_hat.len() != mu_grad.len() {
        return Err(Error::Shape("g_hat and mu_grad differ in length".into()));
    }
    let unit_norm = g_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (unit_norm - 1.0).abs() > 1e-9 {
        return Err(Error::Numeric(format!("g_hat is not a unit vector (norm {unit_norm})")));
    }
    let diff_at = |sf: f64| -> f64 {
        g_hat.iter().zip(mu_grad).map(|(g, m)| (sf * g - m).powi(2)).sum()
    };

    let (mut start, mut end) = (SF_START, SF_END);
    let mut last_midpoint = f64::NAN;
    let mut feasible: Option<(f64, f64)> = None;
    let mut iterations = 0;
    while (start - end).abs() > SF_TOLERANCE {
        let sf = 0.5 * (start + end);
        let diff = diff_at(sf);
        if diff > g_dist {
            start = sf;
        } else {
            end = sf;
            feasible = Some((sf, diff));
        }
        last_midpoint = sf;
        iterations += 1;
    }

    Ok(match feasible {
        Some((sf, diff)) => ScaleSearch { sf, diff, last_midpoint, iterations, fallback_used: false },
        None => {
            let projection: f64 = g_hat.iter().zip(mu_grad).map(|(g, m)| g * m).sum();
            let sf = projection.clamp(SF_START, SF_END);
            ScaleSearch { sf, diff: diff_at(sf), last_midpoint, iterations, fallback_used: true }
        }
    })
}

fn mean_and_std(updates: &[ParamVector]) -> Result<(ParamVector, ParamVector)> {
    let mu = ParamVector::mean_of(updates)?;
    let n = updates.len() as f64;
    let mut var = ParamVector::zeros(mu.len());
    for u in updates {
        for ((v, x), m) in var.iter_mut().zip(u.iter()).zip(mu.iter()) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v = (*v / n).sqrt());
    Ok((mu, var))
}

/// LIE: `mu - z * sigma` per coordinate, with population standard deviation
/// over the controlled clients' honest updates.
pub fn lie_attack(updates: &[ParamVector], z: f64) -> Result<ParamVector> {
    if updates.len() < 2 {
        return Err(Error::Config("LIE needs at least 2 updates".into()));
    }
    let (mu, sigma) = mean_and_std(updates)?;
    Ok(mu.iter().zip(sigma.iter()).map(|(m, s)| m - z * s).collect::<Vec<_>>().into())
}

/// Min-Max: move from the mean along a fixed perturbation `p` as far as
/// possible while the farthest known update stays within the largest pairwise
/// distance between known updates. `gamma` is found by bisection on
/// `[0, 1000]` to a tolerance of 0.01. An inverse-unit direction with a zero
/// mean falls back to the negative-std direction.
pub fn min_max_attack(updates: &[ParamVector], direction: MinMaxDirection) -> Result<ParamVector> {
    if updates.len() < 2 {
        return Err(Error::Config("Min-Max needs at least 2 updates".into()));
    }
    let (mu, sigma) = mean_and_std(updates)?;
    let mu_norm = mu.norm();
    let perturbation = match direction {
        MinMaxDirection::InverseUnit if mu_norm > 0.0 => mu.scaled(-1.0 / mu_norm),
        _ => sigma.scaled(-1.0),
    };
    let bound = pairwise_extreme_sqdist(updates, Extreme::Max)?.sqrt();
    let candidate = |gamma: f64| {
        let mut c = mu.clone();
        c.axpy(gamma, &perturbation);
        c
    };
    let feasible = |gamma: f64| {
        let c = candidate(gamma);
        updates.iter().all(|u| sq_dist(&c, u).sqrt() <= bound)
    };

    let gamma = if feasible(GAMMA_MAX) {
        GAMMA_MAX
    } else {
        let (mut lo, mut hi) = (0.0, GAMMA_MAX);
        while hi - lo > GAMMA_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(candidate(gamma))
}

/// `update + N(0, sigma^2 I)`, deterministic in `seed`.
pub fn gaussian_noise_attack(update: &ParamVector, sigma: f64, seed: u64) -> Result<ParamVector> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(update.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng_for(seed, tags::NOISE, &[]);
    Ok(update.iter().map(|v| v + normal.sample(&mut rng)).collect::<Vec<_>>().into())
}

pub fn scale_attack(update: &ParamVector, lambda: f64) -> ParamVector {
    update.scaled(lambda)
}

/// Reverse the label order: `y -> (C - 1) - y`.
pub fn label_flip(labels: &[usize], class_count: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&y| {
            if y >= class_count {
                Err(Error::Config(format!("label {y} outside [0, {class_count})")))
            } else {
                Ok(class_count - 1 - y)
            }
        })
        .collect()
}
