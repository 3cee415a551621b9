//! Dual-model local updates with pseudo-labeling, residual alignment and
//! cross-model proximity.
//!
//! Each selected client trains the supervised model on its labeled subset
//! and the unsupervised model on its pseudo-labeled subset. A dual model is
//! pulled toward the *other* global dual model, and each side's compact
//! residual network learns the logit difference between the two globals
//! while complementing its own dual model's predictions.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::federation::{
    ClientContext, ClientUpdate, HeadLogits, LocalModels, PseudoLabelReport, RoundState, Strategy,
};
use crate::nn::{forward, softmax_in_place, Matrix, ModelParams, SgdConfig};
use crate::seed;
use crate::train::{train_classifier, train_residual, LocalSchedule, Penalty};

const PHASE_SUPERVISED: u64 = 0;
const PHASE_UNSUPERVISED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumaHyperparams {
    /// Weight of the residual distillation term.
    pub lambda: f64,
    /// Weight of the cross-model proximity term.
    pub gamma: f64,
    /// Distillation temperature.
    pub tau: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Minimum softmax confidence for a pseudo-label to be used.
    pub threshold: Option<f64>,
    /// Use `½γ‖·‖²` instead of `γ‖·‖` for the proximity term.
    pub proximity_squared: bool,
}

impl Default for SumaHyperparams {
    fn default() -> Self {
        SumaHyperparams {
            lambda: 1.0,
            gamma: 0.01,
            tau: 3.0,
            local_epochs: 5,
            batch_size: 32,
            threshold: None,
            proximity_squared: false,
        }
    }
}

impl SumaHyperparams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, name: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg(self.lambda, "lambda")?;
        nonneg(self.gamma, "gamma")?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("local_epochs and batch_size must be at least 1"));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::config(format!("threshold must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }

    fn schedule(&self, sgd: SgdConfig) -> LocalSchedule {
        LocalSchedule {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            sgd,
        }
    }
}

/// Unlabeled rows with the labels assigned to them this round.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledSet {
    pub features: Matrix,
    pub pseudo_labels: Vec<usize>,
    /// Row of each kept sample in the source unlabeled matrix.
    pub positions: Vec<usize>,
    pub source_round: usize,
}

impl PseudoLabeledSet {
    pub fn len(&self) -> usize {
        self.pseudo_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudo_labels.is_empty()
    }
}

/// Argmax of `f(u; model) + f(u; residual)` with lowest-index tie-breaking.
/// With a threshold, samples whose softmax confidence falls below it are dropped.
pub fn pseudo_label(
    unlabeled: &Matrix,
    model: &ModelParams,
    residual: Option<&ModelParams>,
    threshold: Option<f64>,
    source_round: usize,
) -> Result<PseudoLabeledSet> {
    if unlabeled.rows() == 0 {
        return Err(Error::config("pseudo-labeling needs at least one unlabeled sample"));
    }
    let logits = summed_logits(model, residual, unlabeled)?;
    let mut positions = Vec::with_capacity(unlabeled.rows());
    let mut labels = Vec::with_capacity(unlabeled.rows());
    for (i, row) in logits.iter_rows().enumerate() {
        let label = crate::nn::argmax(row);
        if let Some(t) = threshold {
            let mut p = row.to_vec();
            softmax_in_place(&mut p, 1.0);
            if p[label] < t {
                continue;
            }
        }
        positions.push(i);
        labels.push(label);
    }
    Ok(PseudoLabeledSet {
        features: unlabeled.select_rows(&positions),
        pseudo_labels: labels,
        positions,
        source_round,
    })
}

fn summed_logits(model: &ModelParams, residual: Option<&ModelParams>, x: &Matrix) -> Result<Matrix> {
    let base = forward(model, x)?;
    match residual {
        Some(r) => base.add(&forward(r, x)?),
        None => Ok(base),
    }
}

/// Which dual model a local update trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Supervised,
    Unsupervised,
}

/// Globals seen from one side: its own dual model, the other dual model and
/// its residual.
struct SideView<'a> {
    own: &'a ModelParams,
    other: &'a ModelParams,
    residual: Option<&'a ModelParams>,
}

fn view(globals: &RoundState, side: Side) -> SideView<'_> {
    match side {
        Side::Supervised => SideView {
            own: &globals.supervised,
            other: &globals.unsupervised,
            residual: globals.residual_us.as_ref(),
        },
        Side::Unsupervised => SideView {
            own: &globals.unsupervised,
            other: &globals.supervised,
            residual: globals.residual_su.as_ref(),
        },
    }
}

/// Result of one side's local training.
#[derive(Debug, Clone, PartialEq)]
pub struct SideUpdate {
    pub model: ModelParams,
    pub residual: Option<ModelParams>,
    pub dual_loss: f64,
    pub residual_loss: Option<f64>,
}

/// Trains one side on `(features, labels)`: first the dual model with the
/// proximity pull toward the other global dual model, then the residual
/// against the frozen global dual models.
pub fn train_side(
    side: Side,
    features: &Matrix,
    labels: &[usize],
    globals: &RoundState,
    hp: &SumaHyperparams,
    sgd: SgdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SideUpdate> {
    let v = view(globals, side);
    let schedule = hp.schedule(sgd);
    let penalty = if hp.proximity_squared {
        Penalty::Squared {
            reference: v.other,
            mu: hp.gamma,
        }
    } else {
        Penalty::Norm {
            reference: v.other,
            gamma: hp.gamma,
        }
    };
    let (model, dual_loss) = train_classifier(v.own, features, labels, &schedule, penalty, rng)?;

    let (residual, residual_loss) = match v.residual {
        Some(init) => {
            let base = forward(v.own, features)?;
            let target = forward(v.other, features)?.sub(&base)?;
            let (r, loss) = train_residual(init, features, labels, &base, &target, hp.lambda, hp.tau, &schedule, rng)?;
            (Some(r), Some(loss))
        }
        None => (None, None),
    };
    Ok(SideUpdate {
        model,
        residual,
        dual_loss,
        residual_loss,
    })
}

/// Local update of the supervised model and its residual on labeled data.
pub fn local_update_supervised(
    features: &Matrix,
    labels: &[usize],
    globals: &RoundState,
    hp: &SumaHyperparams,
    sgd: SgdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SideUpdate> {
    if labels.is_empty() {
        return Err(Error::config("supervised update needs labeled data"));
    }
    train_side(Side::Supervised, features, labels, globals, hp, sgd, rng)
}

/// The model and residual that label unlabeled data at the start of a round.
///
/// With residuals the labels come from the previous round's supervised model
/// plus the current supervised residual; without them the current global
/// supervised model labels alone.
pub fn pseudo_label_source(globals: &RoundState) -> (&ModelParams, Option<&ModelParams>) {
    match &globals.residual_us {
        Some(r) => (&globals.supervised_prev, Some(r)),
        None => (&globals.supervised, None),
    }
}

/// Pseudo-labels the unlabeled subset, then runs the mirrored update. Returns
/// `None` when thresholding leaves nothing to train on.
pub fn local_update_unsupervised(
    unlabeled: &Matrix,
    globals: &RoundState,
    hp: &SumaHyperparams,
    sgd: SgdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(SideUpdate, PseudoLabeledSet)>> {
    let (model, residual) = pseudo_label_source(globals);
    let set = pseudo_label(unlabeled, model, residual, hp.threshold, globals.round)?;
    if set.is_empty() {
        return Ok(None);
    }
    let update = train_side(Side::Unsupervised, &set.features, &set.pseudo_labels, globals, hp, sgd, rng)?;
    Ok(Some((update, set)))
}

/// Inference head selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Supervised,
    Unsupervised,
    Ensemble,
}

/// Logits of all heads. With residuals, each head pairs the previous round's
/// dual model with the current residual; the ensemble averages the two.
pub fn head_logits(state: &RoundState, features: &Matrix) -> Result<HeadLogits> {
    let (sup, unsup) = match (&state.residual_us, &state.residual_su) {
        (Some(r_us), Some(r_su)) => (
            summed_logits(&state.supervised_prev, Some(r_us), features)?,
            summed_logits(&state.unsupervised_prev, Some(r_su), features)?,
        ),
        _ => (
            forward(&state.supervised, features)?,
            forward(&state.unsupervised, features)?,
        ),
    };
    let ensemble = sup.add(&unsup)?.scale(0.5);
    Ok(HeadLogits {
        supervised: sup,
        unsupervised: unsup,
        ensemble,
    })
}

/// Logits and argmax labels of one head.
pub fn infer(features: &Matrix, state: &RoundState, head: Head) -> Result<(Matrix, Vec<usize>)> {
    let heads = head_logits(state, features)?;
    let logits = match head {
        Head::Supervised => heads.supervised,
        Head::Unsupervised => heads.unsupervised,
        Head::Ensemble => heads.ensemble,
    };
    let labels = logits.argmax_rows();
    Ok((logits, labels))
}

/// The SUMA strategy for the round engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Suma {
    pub hyperparams: SumaHyperparams,
    pub sgd: SgdConfig,
}

impl Suma {
    pub fn new(hyperparams: SumaHyperparams, sgd: SgdConfig) -> Result<Self> {
        hyperparams.validate()?;
        sgd.validate()?;
        Ok(Suma { hyperparams, sgd })
    }
}

impl Strategy for Suma {
    fn name(&self) -> &str {
        "suma"
    }

    fn local_update(&self, ctx: &ClientContext, client: &ClientDataset, globals: &RoundState) -> Result<ClientUpdate> {
        let mut update = ClientUpdate::empty(client.client_id());
        if client.n_labeled() > 0 {
            let mut rng = seed::client_rng(ctx.run_seed, ctx.round, ctx.client_id, PHASE_SUPERVISED);
            let side = local_update_supervised(
                client.labeled_features(),
                client.labels(),
                globals,
                &self.hyperparams,
                self.sgd,
                &mut rng,
            )?;
            update.supervised = Some(LocalModels {
                model: side.model,
                residual: side.residual,
                weight: client.n_labeled(),
                mean_loss: side.dual_loss,
            });
        }
        if client.n_unlabeled() > 0 {
            let mut rng = seed::client_rng(ctx.run_seed, ctx.round, ctx.client_id, PHASE_UNSUPERVISED);
            if let Some((side, set)) =
                local_update_unsupervised(client.unlabeled_features(), globals, &self.hyperparams, self.sgd, &mut rng)?
            {
                update.unsupervised = Some(LocalModels {
                    model: side.model,
                    residual: side.residual,
                    weight: client.n_unlabeled(),
                    mean_loss: side.dual_loss,
                });
                update.pseudo_labels = Some(PseudoLabelReport {
                    positions: set.positions,
                    labels: set.pseudo_labels,
                });
            }
        }
        Ok(update)
    }

    fn predict(&self, state: &RoundState, features: &Matrix) -> Result<HeadLogits> {
        head_logits(state, features)
    }
}
