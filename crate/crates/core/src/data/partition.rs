use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub clients: usize,
    pub alpha: f64,
    pub seed: u64,
    pub min_samples_per_client: usize,
}

impl PartitionConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("client count must be at least 1"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!(
                "dirichlet alpha must be a positive finite number, got {}",
                self.alpha
            )));
        }
        if self.min_samples_per_client == 0 {
            return Err(Error::config("min_samples_per_client must be at least 1"));
        }
        if self.clients * self.min_samples_per_client > n {
            return Err(Error::config(format!(
                "{} clients with at least {} samples each need {} samples, dataset has {n}",
                self.clients,
                self.min_samples_per_client,
                self.clients * self.min_samples_per_client
            )));
        }
        Ok(())
    }
}

/// Splits `data` across clients with per-class Dirichlet proportions.
///
/// For each class (ascending) the class's indices are shuffled, a proportion
/// vector `p ~ Dir(α·1_K)` is drawn, and client `k` receives the next
/// `round(p_k · n_c)` indices. Rounding surplus goes to the largest share;
/// a rounding deficit is taken one index at a time from the currently largest
/// block. Clients left below the minimum then take one sample at a time from
/// the currently largest client.
pub fn dirichlet_partition(data: &Dataset, cfg: &PartitionConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate(data.len())?;
    let k = cfg.clients;
    let mut rng = seed::rng(cfg.seed, &[seed::stream::PARTITION]);
    let gamma = Gamma::new(cfg.alpha, 1.0)
        .map_err(|e| Error::config(format!("invalid dirichlet alpha {}: {e}", cfg.alpha)))?;
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k];

    for c in 0..data.class_count() {
        let mut idx = data.class_indices(c);
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let proportions = draw_dirichlet(&gamma, k, &mut rng);
        let n_c = idx.len();
        let mut sizes: Vec<i64> = proportions
            .iter()
            .map(|p| (p * n_c as f64).round() as i64)
            .collect();
        let largest_share = argmax_first(&proportions);
        let mut diff = n_c as i64 - sizes.iter().sum::<i64>();
        if diff > 0 {
            sizes[largest_share] += diff;
        }
        while diff < 0 {
            let big = argmax_first(&sizes);
            sizes[big] -= 1;
            diff += 1;
        }
        let mut cursor = 0;
        for (part, &size) in parts.iter_mut().zip(&sizes) {
            let size = size as usize;
            part.extend_from_slice(&idx[cursor..cursor + size]);
            cursor += size;
        }
        debug_assert_eq!(cursor, n_c);
    }

    while let Some(small) = parts.iter().position(|p| p.len() < cfg.min_samples_per_client) {
        let lens: Vec<usize> = parts.iter().map(Vec::len).collect();
        let big = argmax_first(&lens);
        let moved = parts[big].pop().expect("largest client is non-empty");
        parts[small].push(moved);
    }
    Ok(parts)
}

/// Normalized Gamma draws; falls back to a one-hot vector if every draw underflows.
fn draw_dirichlet(gamma: &Gamma<f64>, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|d| d / total).collect()
    } else {
        let mut onehot = vec![0.0; k];
        onehot[rng.gen_range(0..k)] = 1.0;
        onehot
    }
}

fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
