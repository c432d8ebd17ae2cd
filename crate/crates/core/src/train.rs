//! Minibatch training loop shared by honest clients and the malicious proxy
//! model.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{LossSign, ModelState, Optimizer, OptimizerConfig};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Rows per step; a value >= the dataset size means full-batch steps.
    pub batch_size: usize,
    pub epochs: usize,
}

/// What to do after an optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    /// Undo the step just taken and stop training.
    RevertAndStop,
}

/// Summary of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainStats {
    /// Steps that were kept.
    pub steps: usize,
    pub reverted: bool,
}

/// Run `cfg.epochs` passes of shuffled minibatch descent on `sign * CE`.
/// `after_step` sees the model after every step and may ask to revert it.
pub fn train_minibatch<F>(
    model: &mut ModelState,
    data: &Dataset,
    cfg: &TrainConfig,
    sign: LossSign,
    rng: &mut SimRng,
    mut after_step: F,
) -> Result<TrainStats>
where
    F: FnMut(&ModelState) -> StepControl,
{
    if data.is_empty() {
        return Err(Error::Empty("no training data".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut optimizer = Optimizer::new(cfg.optimizer, model.params().len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = TrainStats::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.batch_of(chunk)?;
            let (_, grad) = model.loss_and_grad(&batch, sign)?;
            let previous = model.params().clone();
            optimizer.step(model.params_mut(), &grad)?;
            if !model.params().is_finite() {
                return Err(Error::Numeric("parameters diverged".into()));
            }
            match after_step(model) {
                StepControl::Continue => stats.steps += 1,
                StepControl::RevertAndStop => {
                    *model.params_mut() = previous;
                    stats.reverted = true;
                    return Ok(stats);
                }
            }
        }
    }
    Ok(stats)
}
