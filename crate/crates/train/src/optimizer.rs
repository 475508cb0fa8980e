//! Momentum SGD with L2 weight decay folded into the velocity.

use serde::{Deserialize, Serialize};
use vfd_model::ParamStore;
use vfd_tensor::{Float, Tensor};

use crate::{TrainError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub initial_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub epoch_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.03,
            momentum: 0.9,
            weight_decay: 1e-5,
            epoch_decay: 0.97f64.powf(0.1),
        }
    }
}

impl OptimizerConfig {
    /// Learning rate of epoch `e` (0-based).
    pub fn lr(&self, epoch: usize) -> f64 {
        self.initial_lr * self.epoch_decay.powi(epoch as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_lr > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0
            && self.epoch_decay > 0.0
            && self.epoch_decay <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::Contract(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Velocity buffers, one per parameter.
#[derive(Clone, Debug, Default)]
pub struct SgdState<T> {
    velocity: Vec<Tensor<T>>,
}

impl<T: Float> SgdState<T> {
    pub fn new() -> Self {
        Self { velocity: Vec::new() }
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient held a NaN or infinity; nothing was changed.
    Aborted,
}

/// `v <- m v + g + wd p` (decay only for parameters registered with
/// decay), then `p <- p - lr v`. A missing gradient counts as zero.
pub fn sgd_step<T: Float>(
    params: &mut ParamStore<T>,
    grads: &[Option<Tensor<T>>],
    state: &mut SgdState<T>,
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    if grads.len() != params.len() {
        return Err(TrainError::Contract(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for (id, g) in grads.iter().enumerate() {
        if let Some(g) = g {
            if g.shape() != params.value(id).shape() {
                return Err(TrainError::Contract(format!(
                    "gradient of {} has shape {:?}, parameter {:?}",
                    params.name(id),
                    g.shape(),
                    params.value(id).shape()
                )));
            }
        }
    }
    if grads.iter().flatten().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::Aborted);
    }
    if state.velocity.len() != params.len() {
        state.velocity = params.values().iter().map(|p| Tensor::zeros(p.shape())).collect();
    }
    let (m, lr) = (T::lit(cfg.momentum), T::lit(lr));
    for (id, g) in grads.iter().enumerate() {
        let wd = if params.decays(id) { T::lit(cfg.weight_decay) } else { T::zero() };
        let v = state.velocity[id].data_mut();
        let p = params.value_mut(id).data_mut();
        for k in 0..p.len() {
            let gk = g.as_ref().map_or(T::zero(), |g| g.data()[k]);
            v[k] = m * v[k] + gk + wd * p[k];
            p[k] -= lr * v[k];
        }
    }
    Ok(StepOutcome::Applied)
}
