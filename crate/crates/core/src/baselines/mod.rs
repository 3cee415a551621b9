//! Single-model reference strategies: FedAvg, FedProx and FedAvg with
//! confidence-thresholded pseudo-labeling. They keep their one global model
//! in the supervised slot of the round state.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::federation::{ClientContext, ClientUpdate, HeadLogits, LocalModels, PseudoLabelReport, RoundState, Strategy};
use crate::nn::{forward, softmax_in_place, Matrix, ModelParams};
use crate::seed;
use crate::train::{train_classifier, ClassifierTrainer, LocalSchedule, Penalty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    FedAvg,
    FedProx,
    FedPseudo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Proximal coefficient, FedProx only.
    pub mu_prox: f64,
    /// Pseudo-label confidence threshold, FedPseudo only.
    pub threshold: f64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_prox >= 0.0) || !self.mu_prox.is_finite() {
            return Err(Error::config(format!("fedprox mu must be >= 0, got {}", self.mu_prox)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(format!(
                "pseudo-label threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Local SGD on cross-entropy from the received global model.
pub fn fedavg_local(
    features: &Matrix,
    labels: &[usize],
    global: &ModelParams,
    schedule: &LocalSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, f64)> {
    train_classifier(global, features, labels, schedule, Penalty::None, rng)
}

/// FedAvg plus `(μ/2)‖w − w_global‖²` toward the client's own received model.
pub fn fedprox_local(
    features: &Matrix,
    labels: &[usize],
    global: &ModelParams,
    mu: f64,
    schedule: &LocalSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, f64)> {
    train_classifier(
        global,
        features,
        labels,
        schedule,
        Penalty::Squared { reference: global, mu },
        rng,
    )
}

/// Each epoch trains on the labeled subset, then pseudo-labels the unlabeled
/// subset with the current local model and trains on the samples whose
/// confidence reaches `threshold`. The threshold is not range-checked here;
/// a value above one selects nothing.
pub fn fedpseudo_local(
    labeled: (&Matrix, &[usize]),
    unlabeled: &Matrix,
    global: &ModelParams,
    threshold: f64,
    schedule: &LocalSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, f64, PseudoLabelReport)> {
    let (features, labels) = labeled;
    let mut trainer = ClassifierTrainer::new(global, schedule.sgd)?;
    let mut last_report = PseudoLabelReport::default();
    for _ in 0..schedule.epochs {
        if !labels.is_empty() {
            trainer.epoch(features, labels, schedule.batch_size, Penalty::None, rng)?;
        }
        if unlabeled.rows() == 0 {
            continue;
        }
        let mut probs = forward(trainer.params(), unlabeled)?;
        let mut report = PseudoLabelReport::default();
        for i in 0..probs.rows() {
            let row = probs.row_mut(i);
            softmax_in_place(row, 1.0);
            let label = crate::nn::argmax(row);
            if row[label] >= threshold {
                report.positions.push(i);
                report.labels.push(label);
            }
        }
        if !report.positions.is_empty() {
            let x = unlabeled.select_rows(&report.positions);
            trainer.epoch(&x, &report.labels, schedule.batch_size, Penalty::None, rng)?;
        }
        last_report = report;
    }
    let (params, loss) = trainer.finish();
    Ok((params, loss, last_report))
}

/// A baseline strategy for the round engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub config: BaselineConfig,
    pub schedule: LocalSchedule,
}

impl Baseline {
    pub fn new(config: BaselineConfig, schedule: LocalSchedule) -> Result<Self> {
        config.validate()?;
        schedule.sgd.validate()?;
        if schedule.epochs == 0 || schedule.batch_size == 0 {
            return Err(Error::config("local_epochs and batch_size must be at least 1"));
        }
        Ok(Baseline { config, schedule })
    }
}

impl Strategy for Baseline {
    fn name(&self) -> &str {
        match self.config.kind {
            BaselineKind::FedAvg => "fedavg",
            BaselineKind::FedProx => "fedprox",
            BaselineKind::FedPseudo => "fedpseudo",
        }
    }

    fn local_update(&self, ctx: &ClientContext, client: &ClientDataset, globals: &RoundState) -> Result<ClientUpdate> {
        let mut update = ClientUpdate::empty(client.client_id());
        // Clients without labels are skipped by every baseline.
        if client.n_labeled() == 0 {
            return Ok(update);
        }
        let mut rng = seed::client_rng(ctx.run_seed, ctx.round, ctx.client_id, 0);
        let x = client.labeled_features();
        let y = client.labels();
        let (model, loss, weight) = match self.config.kind {
            BaselineKind::FedAvg => {
                let (m, l) = fedavg_local(x, y, &globals.supervised, &self.schedule, &mut rng)?;
                (m, l, client.n_labeled())
            }
            BaselineKind::FedProx => {
                let (m, l) = fedprox_local(x, y, &globals.supervised, self.config.mu_prox, &self.schedule, &mut rng)?;
                (m, l, client.n_labeled())
            }
            BaselineKind::FedPseudo => {
                let (m, l, report) = fedpseudo_local(
                    (x, y),
                    client.unlabeled_features(),
                    &globals.supervised,
                    self.config.threshold,
                    &self.schedule,
                    &mut rng,
                )?;
                if client.n_unlabeled() > 0 {
                    update.pseudo_labels = Some(report);
                }
                (m, l, client.n_labeled() + client.n_unlabeled())
            }
        };
        update.supervised = Some(LocalModels {
            model,
            residual: None,
            weight,
            mean_loss: loss,
        });
        Ok(update)
    }

    fn predict(&self, state: &RoundState, features: &Matrix) -> Result<HeadLogits> {
        let logits = forward(&state.supervised, features)?;
        Ok(HeadLogits {
            supervised: logits.clone(),
            unsupervised: logits.clone(),
            ensemble: logits,
        })
    }
}
