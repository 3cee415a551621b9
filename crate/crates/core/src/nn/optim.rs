use super::model::{GradientVector, ModelParams};
use crate::error::{Error, Result};

/// Learning rate and momentum of classic (non-Nesterov) SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: SgdConfig,
    momentum_buffer: Vec<f64>,
}

impl OptimizerState {
    /// Fresh state with a zero momentum buffer. A zero learning rate is
    /// accepted here (it makes [`sgd_step`] the identity).
    pub fn new(config: SgdConfig, param_count: usize) -> Result<Self> {
        if !(config.learning_rate >= 0.0) || !(0.0..1.0).contains(&config.momentum) {
            return Err(Error::config(format!("invalid optimizer settings {config:?}")));
        }
        Ok(OptimizerState {
            config,
            momentum_buffer: vec![0.0; param_count],
        })
    }

    pub fn config(&self) -> SgdConfig {
        self.config
    }

    pub fn momentum_buffer(&self) -> &[f64] {
        &self.momentum_buffer
    }
}

/// `buffer ← μ·buffer + g`, then `params ← params − η·buffer`.
pub fn sgd_step(params: &mut ModelParams, grad: &GradientVector, state: &mut OptimizerState) -> Result<()> {
    if grad.len() != params.len() || state.momentum_buffer.len() != params.len() {
        return Err(Error::config(format!(
            "sgd step on {} parameters with a {}-entry gradient and {}-entry buffer",
            params.len(),
            grad.len(),
            state.momentum_buffer.len()
        )));
    }
    if let Some(i) = grad.values().iter().position(|g| !g.is_finite()) {
        return Err(Error::numerical(format!("gradient entry {i} is not finite")));
    }
    let SgdConfig {
        learning_rate,
        momentum,
    } = state.config;
    for ((w, b), &g) in params
        .values_mut()
        .iter_mut()
        .zip(state.momentum_buffer.iter_mut())
        .zip(grad.values())
    {
        *b = momentum * *b + g;
        *w -= learning_rate * *b;
    }
    Ok(())
}
