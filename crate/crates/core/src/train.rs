//! Local minibatch training loops shared by every strategy.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    backward, cross_entropy_loss, forward, kl_distill_loss, l2_proximity, sgd_step, squared_proximity, Matrix,
    ModelParams, OptimizerState, SgdConfig,
};

/// Epoch and batch settings for one local training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
}

/// Parameter-space penalty added to the classification loss.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    None,
    /// `γ‖w − reference‖₂`
    Norm { reference: &'a ModelParams, gamma: f64 },
    /// `(μ/2)‖w − reference‖₂²`
    Squared { reference: &'a ModelParams, mu: f64 },
}

/// Shuffles `0..n` and cuts it into consecutive batches (the last may be short).
pub fn minibatches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

fn check_loss(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(format!("local loss became {loss}")))
    }
}

/// Classifier being trained with one optimizer state across epochs.
pub struct ClassifierTrainer {
    params: ModelParams,
    state: OptimizerState,
    loss_total: f64,
    steps: usize,
}

impl ClassifierTrainer {
    pub fn new(init: &ModelParams, sgd: SgdConfig) -> Result<Self> {
        Ok(ClassifierTrainer {
            state: OptimizerState::new(sgd, init.len())?,
            params: init.clone(),
            loss_total: 0.0,
            steps: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// One pass of shuffled minibatches over `(features, labels)`.
    pub fn epoch(
        &mut self,
        features: &Matrix,
        labels: &[usize],
        batch_size: usize,
        penalty: Penalty<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        for batch in minibatches(features.rows(), batch_size, rng) {
            let x = features.select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let logits = forward(&self.params, &x)?;
            let (loss, grad_logits) = cross_entropy_loss(&logits, &y)?;
            check_loss(loss)?;
            let mut grad = backward(&self.params, &x, &grad_logits)?;
            match penalty {
                Penalty::None => {}
                Penalty::Norm { reference, gamma } => {
                    if gamma > 0.0 {
                        grad.accumulate(&l2_proximity(&self.params, reference, gamma)?.1)?;
                    }
                }
                Penalty::Squared { reference, mu } => {
                    if mu > 0.0 {
                        grad.accumulate(&squared_proximity(&self.params, reference, mu)?.1)?;
                    }
                }
            }
            sgd_step(&mut self.params, &grad, &mut self.state)?;
            self.loss_total += loss;
            self.steps += 1;
        }
        Ok(())
    }

    /// Trained parameters and the mean cross-entropy over all steps taken.
    pub fn finish(self) -> (ModelParams, f64) {
        let mean = if self.steps == 0 {
            0.0
        } else {
            self.loss_total / self.steps as f64
        };
        (self.params, mean)
    }
}

/// Minibatch SGD on mean cross-entropy plus `penalty`, starting from `init`.
/// Returns the trained parameters and the mean cross-entropy over all steps.
pub fn train_classifier(
    init: &ModelParams,
    features: &Matrix,
    labels: &[usize],
    schedule: &LocalSchedule,
    penalty: Penalty<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, f64)> {
    let mut trainer = ClassifierTrainer::new(init, schedule.sgd)?;
    for _ in 0..schedule.epochs {
        trainer.epoch(features, labels, schedule.batch_size, penalty, rng)?;
    }
    Ok(trainer.finish())
}

/// Trains a residual network `r` whose logits are added to frozen `base`
/// logits: loss `CE(base + r(x), y) + λ·KL(σ(r(x)/τ) ‖ σ(target/τ))`.
/// `base` and `target` are precomputed per sample (rows aligned with `features`).
#[allow(clippy::too_many_arguments)]
pub fn train_residual(
    init: &ModelParams,
    features: &Matrix,
    labels: &[usize],
    base: &Matrix,
    target: &Matrix,
    lambda: f64,
    tau: f64,
    schedule: &LocalSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, f64)> {
    let mut params = init.clone();
    let mut state = OptimizerState::new(schedule.sgd, params.len())?;
    let mut total = 0.0;
    let mut steps = 0usize;
    for _ in 0..schedule.epochs {
        for batch in minibatches(features.rows(), schedule.batch_size, rng) {
            let x = features.select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let residual = forward(&params, &x)?;
            let combined = base.select_rows(&batch).add(&residual)?;
            let (ce, mut grad_logits) = cross_entropy_loss(&combined, &y)?;
            let mut loss = ce;
            if lambda > 0.0 {
                let (kl, grad_kl) = kl_distill_loss(&residual, &target.select_rows(&batch), tau)?;
                loss += lambda * kl;
                for (g, k) in grad_logits.as_mut_slice().iter_mut().zip(grad_kl.as_slice()) {
                    *g += lambda * k;
                }
            }
            check_loss(loss)?;
            let grad = backward(&params, &x, &grad_logits)?;
            sgd_step(&mut params, &grad, &mut state)?;
            total += loss;
            steps += 1;
        }
    }
    Ok((params, if steps == 0 { 0.0 } else { total / steps as f64 }))
}
