use crate::error::{Error, Result};
use crate::nn::ModelParams;

/// One client's contribution to a weighted average.
#[derive(Debug, Clone, Copy)]
pub struct Contribution<'a> {
    pub client_id: usize,
    pub params: &'a ModelParams,
    pub weight: usize,
}

/// `Σ n_k·w_k / Σ n_k`, accumulated in ascending client-id order.
///
/// Returns [`Error::NoContributions`] for an empty list; a single
/// contribution is returned unchanged.
pub fn aggregate_weighted(contributions: &[Contribution<'_>]) -> Result<ModelParams> {
    let mut sorted: Vec<&Contribution<'_>> = contributions.iter().collect();
    sorted.sort_by_key(|c| c.client_id);
    let first = sorted.first().ok_or(Error::NoContributions)?;
    for c in &sorted {
        first.params.ensure_same_arch(c.params)?;
        if c.weight == 0 {
            return Err(Error::config(format!(
                "client {} contributed with zero weight",
                c.client_id
            )));
        }
    }
    if sorted.len() == 1 {
        return Ok(first.params.clone());
    }
    let mut acc = vec![0.0; first.params.len()];
    let mut total = 0.0;
    for c in &sorted {
        let n = c.weight as f64;
        total += n;
        for (a, &w) in acc.iter_mut().zip(c.params.values()) {
            *a += n * w;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    ModelParams::from_values(first.params.arch().clone(), acc)
}
