use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed;

/// Isotropic Gaussian blobs whose class means lie on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTask {
    means: Vec<Vec<f64>>,
    spread: f64,
}

impl GaussianTask {
    pub fn new(classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Self> {
        if classes < 2 || dim < 2 {
            return Err(Error::config(format!(
                "gaussian task needs at least 2 classes and 2 dimensions, got {classes} and {dim}"
            )));
        }
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(Error::config(format!("spread must be > 0, got {spread}")));
        }
        let mut rng = seed::rng(seed, &[seed::stream::TASK]);
        let means = (0..classes)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        Ok(GaussianTask { means, spread })
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn class_count(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// `n_per_class` samples of every class, grouped by class.
    pub fn sample(&self, n_per_class: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        if n_per_class == 0 {
            return Err(Error::config("n_per_class must be at least 1"));
        }
        let (m, d) = (self.class_count(), self.dim());
        let mut data = Vec::with_capacity(m * n_per_class * d);
        let mut labels = Vec::with_capacity(m * n_per_class);
        for (c, mean) in self.means.iter().enumerate() {
            for _ in 0..n_per_class {
                for &mu in mean {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(mu + self.spread * z);
                }
                labels.push(c);
            }
        }
        Dataset::new(Matrix::from_vec(labels.len(), d, data)?, labels, m)
    }
}

/// Training pool drawn from a seeded [`GaussianTask`].
pub fn synth_gaussian_task(
    classes: usize,
    dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    let task = GaussianTask::new(classes, dim, spread, seed)?;
    task.sample(n_per_class, &mut seed::rng(seed, &[seed::stream::TASK, 1]))
}
