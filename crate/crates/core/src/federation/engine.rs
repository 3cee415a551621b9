use rayon::prelude::*;

use super::aggregate::{aggregate_weighted, Contribution};
use super::select::{select_clients, SelectionResult};
use super::state::RoundState;
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ModelParams};

/// Identifies the client and round a local update belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientContext {
    pub round: usize,
    pub client_id: usize,
    pub run_seed: u64,
}

/// A locally trained model (plus residual) and its aggregation weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModels {
    pub model: ModelParams,
    pub residual: Option<ModelParams>,
    pub weight: usize,
    /// Mean classification loss over the local steps.
    pub mean_loss: f64,
}

/// Pseudo-labels a client trained on, by position in its unlabeled subset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PseudoLabelReport {
    pub positions: Vec<usize>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    /// Produced from the labeled subset; aggregated into the supervised globals.
    pub supervised: Option<LocalModels>,
    /// Produced from the unlabeled subset; aggregated into the unsupervised globals.
    pub unsupervised: Option<LocalModels>,
    pub pseudo_labels: Option<PseudoLabelReport>,
}

impl ClientUpdate {
    pub fn empty(client_id: usize) -> Self {
        ClientUpdate {
            client_id,
            supervised: None,
            unsupervised: None,
            pseudo_labels: None,
        }
    }
}

/// Logits of the three inference heads.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadLogits {
    pub supervised: Matrix,
    pub unsupervised: Matrix,
    pub ensemble: Matrix,
}

/// A federated training method plugged into the round engine.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Local work of one selected client against the received globals.
    fn local_update(&self, ctx: &ClientContext, client: &ClientDataset, globals: &RoundState) -> Result<ClientUpdate>;

    fn predict(&self, state: &RoundState, features: &Matrix) -> Result<HeadLogits>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSettings {
    pub selection_fraction: f64,
    pub run_seed: u64,
    pub parallel: bool,
}

/// What happened in one round, besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub selection: SelectionResult,
    /// `(client, weight)` pairs used for the supervised aggregate.
    pub supervised_weights: Vec<(usize, usize)>,
    /// `(client, weight)` pairs used for the unsupervised aggregate.
    pub unsupervised_weights: Vec<(usize, usize)>,
    pub loss_supervised: Option<f64>,
    pub loss_unsupervised: Option<f64>,
    /// Share of pseudo-labels that match the withheld true labels.
    pub pseudo_accuracy: Option<f64>,
}

/// Runs one round: selection, local updates, aggregation.
///
/// Globals without contributions this round are carried forward unchanged.
pub fn run_round(
    state: &RoundState,
    clients: &[ClientDataset],
    settings: &RoundSettings,
    strategy: &dyn Strategy,
) -> Result<(RoundState, RoundReport)> {
    let round = state.round;
    let selection = select_clients(clients, settings.selection_fraction, round, settings.run_seed)?;

    let work = |&k: &usize| -> Result<ClientUpdate> {
        let ctx = ClientContext {
            round,
            client_id: k,
            run_seed: settings.run_seed,
        };
        let client = &clients[k];
        let wrap = |e: Error| Error::Client {
            client: k,
            round,
            source: Box::new(e.for_client(k)),
        };
        let update = strategy.local_update(&ctx, client, state).map_err(wrap)?;
        check_update(client, &update).map_err(wrap)?;
        Ok(update)
    };
    let updates: Vec<ClientUpdate> = if settings.parallel {
        selection.selected.par_iter().map(work).collect::<Result<_>>()?
    } else {
        selection.selected.iter().map(work).collect::<Result<_>>()?
    };

    let sup: Vec<(usize, &LocalModels)> = updates
        .iter()
        .filter_map(|u| u.supervised.as_ref().map(|m| (u.client_id, m)))
        .collect();
    let unsup: Vec<(usize, &LocalModels)> = updates
        .iter()
        .filter_map(|u| u.unsupervised.as_ref().map(|m| (u.client_id, m)))
        .collect();

    let supervised = aggregate_or_keep(&sup, |m| Some(&m.model), &state.supervised)?;
    let unsupervised = aggregate_or_keep(&unsup, |m| Some(&m.model), &state.unsupervised)?;
    let residual_us = match &state.residual_us {
        Some(prev) => Some(aggregate_or_keep(&sup, |m| m.residual.as_ref(), prev)?),
        None => None,
    };
    let residual_su = match &state.residual_su {
        Some(prev) => Some(aggregate_or_keep(&unsup, |m| m.residual.as_ref(), prev)?),
        None => None,
    };

    let mean = |xs: &[(usize, &LocalModels)]| {
        (!xs.is_empty()).then(|| xs.iter().map(|(_, m)| m.mean_loss).sum::<f64>() / xs.len() as f64)
    };
    let (mut hits, mut total) = (0usize, 0usize);
    for u in &updates {
        if let Some(report) = &u.pseudo_labels {
            let truth = clients[u.client_id].sealed_labels().reveal();
            for (&pos, &label) in report.positions.iter().zip(&report.labels) {
                hits += usize::from(truth[pos] == label);
                total += 1;
            }
        }
    }

    let report = RoundReport {
        round,
        supervised_weights: sup.iter().map(|(k, m)| (*k, m.weight)).collect(),
        unsupervised_weights: unsup.iter().map(|(k, m)| (*k, m.weight)).collect(),
        loss_supervised: mean(&sup),
        loss_unsupervised: mean(&unsup),
        pseudo_accuracy: (total > 0).then(|| hits as f64 / total as f64),
        selection,
    };
    let next = RoundState {
        round: round + 1,
        supervised_prev: state.supervised.clone(),
        unsupervised_prev: state.unsupervised.clone(),
        supervised,
        unsupervised,
        residual_us,
        residual_su,
    };
    Ok((next, report))
}

fn aggregate_or_keep<'a>(
    updates: &[(usize, &'a LocalModels)],
    pick: impl Fn(&'a LocalModels) -> Option<&'a ModelParams>,
    previous: &ModelParams,
) -> Result<ModelParams> {
    let contributions: Vec<Contribution<'a>> = updates
        .iter()
        .filter_map(|&(client_id, m)| {
            pick(m).map(|params| Contribution {
                client_id,
                params,
                weight: m.weight,
            })
        })
        .collect();
    match aggregate_weighted(&contributions) {
        Err(Error::NoContributions) => Ok(previous.clone()),
        other => other,
    }
}

fn check_update(client: &ClientDataset, update: &ClientUpdate) -> Result<()> {
    if update.client_id != client.client_id() {
        return Err(Error::config(format!(
            "update reports client {} for client {}",
            update.client_id,
            client.client_id()
        )));
    }
    if update.supervised.is_some() && client.n_labeled() == 0 {
        return Err(Error::config("a client without labeled data produced a supervised update"));
    }
    if update.unsupervised.is_some() && client.n_unlabeled() == 0 {
        return Err(Error::config("a client without unlabeled data produced an unsupervised update"));
    }
    if let Some(report) = &update.pseudo_labels {
        if report.positions.len() != report.labels.len()
            || report.positions.iter().any(|&p| p >= client.n_unlabeled())
        {
            return Err(Error::config("pseudo-label report does not match the unlabeled subset"));
        }
    }
    Ok(())
}

/// Top-1 accuracy of each head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadAccuracy {
    pub supervised: f64,
    pub unsupervised: f64,
    pub ensemble: f64,
}

pub fn evaluate(strategy: &dyn Strategy, state: &RoundState, features: &Matrix, labels: &[usize]) -> Result<HeadAccuracy> {
    let heads = strategy.predict(state, features)?;
    let acc = |m: &Matrix| {
        let hits = m
            .argmax_rows()
            .iter()
            .zip(labels)
            .filter(|(p, y)| p == y)
            .count();
        hits as f64 / labels.len().max(1) as f64
    };
    Ok(HeadAccuracy {
        supervised: acc(&heads.supervised),
        unsupervised: acc(&heads.unsupervised),
        ensemble: acc(&heads.ensemble),
    })
}
