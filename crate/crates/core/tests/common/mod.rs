//! Helpers shared by the integration tests: finite-difference and
//! scalar-loop oracles, small configs and small datasets.
#![allow(dead_code)]

use std::path::PathBuf;

use fssl_core::config::FederationConfig;
use fssl_core::federation::Contribution;
use fssl_core::nn::{
    backward, cross_entropy_loss, forward, kl_distill_loss, l2_proximity, squared_proximity, Activation,
    GradientVector, Matrix, ModelArch, ModelParams,
};
use fssl_core::seed;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn preset(name: &str) -> FederationConfig {
    fssl_core::config::load_config(&configs_dir().join(format!("{name}.json"))).expect("preset loads")
}

/// A fast config on a small synthetic task.
pub fn tiny_config(strategy: &str) -> FederationConfig {
    FederationConfig::from_json(&format!(
        r#"{{
            "task": {{"kind": "synthetic", "classes": 3, "dim": 4, "n_per_class": 40, "test_per_class": 20, "spread": 0.4, "seed": 5}},
            "strategy": "{strategy}",
            "clients": 6,
            "selection_fraction": 0.5,
            "rounds": 3,
            "local_epochs": 2,
            "batch_size": 8,
            "hidden_layers": [6],
            "dirichlet_alpha": 1.0,
            "annotation": ["full", {{"partial": 0.5}}, {{"partial": 0.25}}, "none", "none", {{"partial": 0.5}}],
            "seed": 3
        }}"#
    ))
    .expect("tiny config parses")
}

pub fn random_matrix(rows: usize, cols: usize, seed_value: u64) -> Matrix {
    let mut rng = seed::rng(seed_value, &[1000]);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap()
}

pub fn random_labels(n: usize, classes: usize, seed_value: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed_value, &[1001]);
    (0..n).map(|_| rng.gen_range(0..classes)).collect()
}

/// A random net with at most 200 parameters.
pub fn small_net(seed_value: u64) -> ModelParams {
    let mut rng = seed::rng(seed_value, &[1002]);
    let input = rng.gen_range(2..6);
    let hidden = rng.gen_range(2..8);
    let classes = rng.gen_range(2..5);
    let act = if seed_value.is_multiple_of(2) { Activation::Tanh } else { Activation::Relu };
    let widths = if seed_value.is_multiple_of(3) {
        vec![input, hidden, hidden, classes]
    } else {
        vec![input, hidden, classes]
    };
    let arch = ModelArch::new(widths, act).unwrap();
    assert!(arch.param_count() <= 200);
    // Glorot leaves biases at zero, which can park a ReLU exactly on its kink
    // where central differences are meaningless. Jitter every parameter.
    let init = ModelParams::init_glorot(arch.clone(), &mut rng);
    let values = init.values().iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    ModelParams::from_values(arch, values).unwrap()
}

pub fn perturbed(p: &ModelParams, seed_value: u64) -> ModelParams {
    let mut rng = seed::rng(seed_value, &[1003]);
    let values = p.values().iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
    ModelParams::from_values(p.arch().clone(), values).unwrap()
}

/// Central differences of `f` with respect to every parameter.
pub fn numeric_gradient(p: &ModelParams, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
    let mut probe = p.clone();
    (0..p.len())
        .map(|i| {
            let orig = probe.values()[i];
            probe.values_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.values_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.values_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Norm-wise relative error between two gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let scale = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// The losses covered by the finite-difference oracle.
pub const GRADIENT_LOSSES: [&str; 5] = ["ce", "kl", "l2", "squared", "weighted"];

/// Analytic and loss-only evaluation of one named loss at `p`.
pub struct LossCase {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub target: Matrix,
    pub base: Matrix,
    pub reference: ModelParams,
    pub tau: f64,
}

impl LossCase {
    pub fn new(p: &ModelParams, seed_value: u64) -> Self {
        let arch = p.arch();
        let rows = 6;
        let x = random_matrix(rows, arch.input_dim(), seed_value);
        let y = random_labels(rows, arch.class_count(), seed_value);
        let target = random_matrix(rows, arch.class_count(), seed_value + 7);
        let base = random_matrix(rows, arch.class_count(), seed_value + 11);
        LossCase {
            x,
            y,
            target,
            base,
            reference: perturbed(p, seed_value),
            tau: 0.5 + (seed_value % 5) as f64,
        }
    }

    pub fn loss(&self, name: &str, p: &ModelParams) -> f64 {
        let logits = forward(p, &self.x).unwrap();
        match name {
            "ce" => cross_entropy_loss(&logits, &self.y).unwrap().0,
            "kl" => kl_distill_loss(&logits, &self.target, self.tau).unwrap().0,
            "l2" => l2_proximity(p, &self.reference, 0.7).unwrap().0,
            "squared" => squared_proximity(p, &self.reference, 0.3).unwrap().0,
            "weighted" => {
                let combined = self.base.add(&logits).unwrap();
                cross_entropy_loss(&combined, &self.y).unwrap().0
                    + 0.8 * kl_distill_loss(&logits, &self.target, self.tau).unwrap().0
                    + 0.7 * l2_proximity(p, &self.reference, 1.0).unwrap().0
                    + 0.2 * squared_proximity(p, &self.reference, 1.0).unwrap().0
            }
            _ => panic!("unknown loss {name}"),
        }
    }

    pub fn gradient(&self, name: &str, p: &ModelParams) -> Vec<f64> {
        let logits = forward(p, &self.x).unwrap();
        let through = |g: &Matrix| backward(p, &self.x, g).unwrap();
        let g: GradientVector = match name {
            "ce" => through(&cross_entropy_loss(&logits, &self.y).unwrap().1),
            "kl" => through(&kl_distill_loss(&logits, &self.target, self.tau).unwrap().1),
            "l2" => l2_proximity(p, &self.reference, 0.7).unwrap().1,
            "squared" => squared_proximity(p, &self.reference, 0.3).unwrap().1,
            "weighted" => {
                let combined = self.base.add(&logits).unwrap();
                let mut gl = cross_entropy_loss(&combined, &self.y).unwrap().1;
                let gk = kl_distill_loss(&logits, &self.target, self.tau).unwrap().1;
                for (a, b) in gl.as_mut_slice().iter_mut().zip(gk.as_slice()) {
                    *a += 0.8 * b;
                }
                let mut g = through(&gl);
                let mut l2 = l2_proximity(p, &self.reference, 1.0).unwrap().1;
                l2.values_mut().iter_mut().for_each(|v| *v *= 0.7);
                let mut sq = squared_proximity(p, &self.reference, 1.0).unwrap().1;
                sq.values_mut().iter_mut().for_each(|v| *v *= 0.2);
                g.accumulate(&l2).unwrap();
                g.accumulate(&sq).unwrap();
                g
            }
            _ => panic!("unknown loss {name}"),
        };
        g.values().to_vec()
    }
}

/// Worst relative error of one loss over the given seeds.
pub fn worst_gradient_error(name: &str, seeds: std::ops::Range<u64>) -> f64 {
    seeds
        .map(|s| {
            let p = small_net(s);
            let case = LossCase::new(&p, s);
            let analytic = case.gradient(name, &p);
            let numeric = numeric_gradient(&p, |q| case.loss(name, q));
            relative_error(&analytic, &numeric)
        })
        .fold(0.0, f64::max)
}

/// Weighted average written as a plain loop over scalars.
pub fn scalar_weighted_average(contributions: &[Contribution<'_>]) -> Vec<f64> {
    let len = contributions[0].params.len();
    let total: f64 = contributions.iter().map(|c| c.weight as f64).sum();
    let mut sorted: Vec<&Contribution<'_>> = contributions.iter().collect();
    sorted.sort_by_key(|c| c.client_id);
    let mut out = vec![0.0; len];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in &sorted {
            acc += c.weight as f64 / total * c.params.values()[i];
        }
        *slot = acc;
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
