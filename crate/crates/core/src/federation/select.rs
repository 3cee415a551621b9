use rand::seq::index;

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Clients taking part in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// Every selected client id, ascending.
    pub selected: Vec<usize>,
    /// Selected clients holding labeled data.
    pub labeled: Vec<usize>,
    /// Selected clients holding unlabeled data.
    pub unlabeled: Vec<usize>,
}

/// Number of clients drawn per round: `max(1, round(C·K))`.
pub fn selection_size(k: usize, fraction: f64) -> usize {
    ((fraction * k as f64).round() as usize).clamp(1, k.max(1))
}

/// Samples `max(1, round(C·K))` distinct ids uniformly from a generator
/// seeded by `(seed, round)`.
pub fn select_ids(k: usize, fraction: f64, round: usize, run_seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!(
            "selection fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if k == 0 {
        return Err(Error::config("cannot select from zero clients"));
    }
    let m = selection_size(k, fraction);
    let mut ids = if m == k {
        (0..k).collect()
    } else {
        let mut rng = seed::rng(run_seed, &[seed::stream::SELECTION, round as u64]);
        index::sample(&mut rng, k, m).into_vec()
    };
    ids.sort_unstable();
    Ok(ids)
}

pub fn select_clients(
    clients: &[ClientDataset],
    fraction: f64,
    round: usize,
    run_seed: u64,
) -> Result<SelectionResult> {
    let selected = select_ids(clients.len(), fraction, round, run_seed)?;
    let labeled = selected
        .iter()
        .copied()
        .filter(|&k| clients[k].n_labeled() > 0)
        .collect();
    let unlabeled = selected
        .iter()
        .copied()
        .filter(|&k| clients[k].n_unlabeled() > 0)
        .collect();
    Ok(SelectionResult {
        selected,
        labeled,
        unlabeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_participation() {
        for t in 0..5 {
            assert_eq!(select_ids(7, 1.0, t, 3).unwrap(), (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn forty_percent_of_twenty_is_eight() {
        for t in 0..20 {
            let ids = select_ids(20, 0.4, t, 9).unwrap();
            assert_eq!(ids.len(), 8);
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn deterministic_and_round_dependent() {
        assert_eq!(select_ids(20, 0.4, 3, 1).unwrap(), select_ids(20, 0.4, 3, 1).unwrap());
        let rounds: Vec<_> = (0..10).map(|t| select_ids(20, 0.4, t, 1).unwrap()).collect();
        assert!(rounds.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn at_least_one_client() {
        assert_eq!(select_ids(3, 0.01, 0, 0).unwrap().len(), 1);
        assert!(select_ids(3, 0.0, 0, 0).is_err());
        assert!(select_ids(3, 1.5, 0, 0).is_err());
    }
}
