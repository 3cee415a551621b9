//! Loss functions and their gradients with respect to logits or parameters.

use super::matrix::Matrix;
use super::model::{GradientVector, ModelParams};
use crate::error::{Error, Result};

/// Norms at or below this are treated as zero by [`l2_proximity`].
pub const PROXIMITY_EPS: f64 = 1e-12;

/// Temperature-scaled softmax, stabilised by subtracting the row maximum.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    let mut out = logits.to_vec();
    softmax_in_place(&mut out, temperature);
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f64], temperature: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Log-softmax of `row / temperature`.
fn log_softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = row.iter().map(|v| (v - max) / temperature).collect();
    let log_sum = scaled.iter().map(|v| v.exp()).sum::<f64>().ln();
    scaled.into_iter().map(|v| v - log_sum).collect()
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::config(format!(
            "temperature must be a positive finite number, got {temperature}"
        )));
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its gradient `(softmax - onehot) / B`.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, m) = (logits.rows(), logits.cols());
    if labels.len() != b {
        return Err(Error::config(format!(
            "{} labels for a batch of {b} logit rows",
            labels.len()
        )));
    }
    if b == 0 {
        return Err(Error::config("cross-entropy needs a non-empty batch"));
    }
    if let Some(i) = labels.iter().position(|&y| y >= m) {
        return Err(Error::data(format!(
            "label {} at index {i} is outside [0, {m})",
            labels[i]
        )));
    }
    let scale = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, m);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let log_p = log_softmax(row, 1.0);
        loss -= log_p[y];
        let g = grad.row_mut(i);
        for (gj, lp) in g.iter_mut().zip(&log_p) {
            *gj = lp.exp() * scale;
        }
        g[y] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Batch mean of `KL(softmax(student/τ) ‖ softmax(target/τ))`; the gradient
/// flows into the student logits only.
pub fn kl_distill_loss(student: &Matrix, target: &Matrix, temperature: f64) -> Result<(f64, Matrix)> {
    check_temperature(temperature)?;
    if !student.same_shape(target) {
        return Err(Error::config(format!(
            "student logits are {}x{}, target logits {}x{}",
            student.rows(),
            student.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let (b, m) = (student.rows(), student.cols());
    if b == 0 {
        return Err(Error::config("distillation needs a non-empty batch"));
    }
    let scale = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, m);
    let mut loss = 0.0;
    for i in 0..b {
        let log_p = log_softmax(student.row(i), temperature);
        let log_q = log_softmax(target.row(i), temperature);
        let diff: Vec<f64> = log_p.iter().zip(&log_q).map(|(p, q)| p - q).collect();
        let p: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
        let kl: f64 = p.iter().zip(&diff).map(|(pj, dj)| pj * dj).sum();
        loss += kl;
        // d/ds_j = p_j (log p_j - log q_j - KL) / τ
        for ((gj, pj), dj) in grad.row_mut(i).iter_mut().zip(&p).zip(&diff) {
            *gj = pj * (dj - kl) / temperature * scale;
        }
    }
    Ok((loss * scale, grad))
}

/// `γ‖w − w_ref‖₂` and its gradient with respect to `w`; the subgradient at
/// zero displacement is the zero vector.
pub fn l2_proximity(params: &ModelParams, reference: &ModelParams, gamma: f64) -> Result<(f64, GradientVector)> {
    check_weight(gamma, "proximity weight")?;
    params.ensure_same_arch(reference)?;
    let diff: Vec<f64> = params
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| a - b)
        .collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm <= PROXIMITY_EPS {
        return Ok((gamma * norm, GradientVector::zeros(diff.len())));
    }
    let grad = diff.into_iter().map(|d| gamma * d / norm).collect();
    Ok((gamma * norm, GradientVector::from_values(grad)))
}

/// `(μ/2)‖w − w_ref‖₂²` and its gradient `μ (w − w_ref)`.
pub fn squared_proximity(params: &ModelParams, reference: &ModelParams, mu: f64) -> Result<(f64, GradientVector)> {
    check_weight(mu, "proximal coefficient")?;
    params.ensure_same_arch(reference)?;
    let diff: Vec<f64> = params
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| a - b)
        .collect();
    let sq = diff.iter().map(|d| d * d).sum::<f64>();
    let grad = diff.into_iter().map(|d| mu * d).collect();
    Ok((0.5 * mu * sq, GradientVector::from_values(grad)))
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::config(format!("{what} must be finite and >= 0, got {w}")));
    }
    Ok(())
}
