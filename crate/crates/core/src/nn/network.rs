//! Forward evaluation and reverse-mode gradients for the dense network family.

use super::matrix::Matrix;
use super::model::{GradientVector, LayerSpan, ModelParams};
use crate::error::{Error, Result};

/// Raw logits `[B x M]` for a batch `[B x input_dim]`.
pub fn forward(params: &ModelParams, batch: &Matrix) -> Result<Matrix> {
    check_batch(params, batch)?;
    let spans = params.arch().spans();
    let activation = params.arch().activation();
    let mut current = batch.clone();
    for (l, span) in spans.iter().enumerate() {
        let mut out = affine(params.values(), span, &current);
        if l + 1 < spans.len() {
            for v in out.as_mut_slice() {
                *v = activation.apply(*v);
            }
        }
        current = out;
    }
    Ok(current)
}

/// Parameter gradient of a scalar loss whose gradient with respect to the
/// logits of `forward(params, batch)` is `grad_logits`.
pub fn backward(params: &ModelParams, batch: &Matrix, grad_logits: &Matrix) -> Result<GradientVector> {
    check_batch(params, batch)?;
    let arch = params.arch();
    if grad_logits.rows() != batch.rows() || grad_logits.cols() != arch.class_count() {
        return Err(Error::config(format!(
            "upstream gradient is {}x{}, expected {}x{}",
            grad_logits.rows(),
            grad_logits.cols(),
            batch.rows(),
            arch.class_count()
        )));
    }
    let spans = arch.spans();
    let activation = arch.activation();
    let values = params.values();

    // inputs[l] feeds layer l; pre[l] is layer l's affine output before activation.
    let mut inputs = Vec::with_capacity(spans.len());
    let mut pre = Vec::with_capacity(spans.len());
    let mut current = batch.clone();
    for (l, span) in spans.iter().enumerate() {
        let z = affine(values, span, &current);
        inputs.push(current);
        if l + 1 < spans.len() {
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = activation.apply(*v);
            }
            current = a;
        } else {
            current = Matrix::zeros(0, 0);
        }
        pre.push(z);
    }

    let mut grad = GradientVector::zeros(params.len());
    let mut delta = grad_logits.clone();
    for l in (0..spans.len()).rev() {
        let span = spans[l];
        let input = &inputs[l];
        let g = grad.values_mut();
        for b in 0..input.rows() {
            let x = input.row(b);
            let d = delta.row(b);
            for (k, &xk) in x.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                let row = &mut g[span.weights + k * span.fan_out..span.weights + (k + 1) * span.fan_out];
                for (gw, &dj) in row.iter_mut().zip(d) {
                    *gw += xk * dj;
                }
            }
            for (gb, &dj) in g[span.bias..span.bias + span.fan_out].iter_mut().zip(d) {
                *gb += dj;
            }
        }
        if l == 0 {
            break;
        }
        let mut next = Matrix::zeros(delta.rows(), span.fan_in);
        let below = &pre[l - 1];
        for b in 0..delta.rows() {
            let d = delta.row(b);
            let z = below.row(b);
            let out = next.row_mut(b);
            for k in 0..span.fan_in {
                let w = &values[span.weights + k * span.fan_out..span.weights + (k + 1) * span.fan_out];
                let s: f64 = w.iter().zip(d).map(|(a, b)| a * b).sum();
                out[k] = s * activation.derivative(z[k]);
            }
        }
        delta = next;
    }
    Ok(grad)
}

fn check_batch(params: &ModelParams, batch: &Matrix) -> Result<()> {
    let want = params.arch().input_dim();
    if batch.cols() != want {
        return Err(Error::config(format!(
            "batch has {} columns but the network expects input width {want}",
            batch.cols()
        )));
    }
    if batch.rows() == 0 {
        return Err(Error::config("batch must contain at least one row"));
    }
    Ok(())
}

fn affine(values: &[f64], span: &LayerSpan, input: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(input.rows(), span.fan_out);
    let bias = &values[span.bias..span.bias + span.fan_out];
    for b in 0..input.rows() {
        let x = input.row(b);
        let o = out.row_mut(b);
        o.copy_from_slice(bias);
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let w = &values[span.weights + k * span.fan_out..span.weights + (k + 1) * span.fan_out];
            for (oj, &wj) in o.iter_mut().zip(w) {
                *oj += xk * wj;
            }
        }
    }
    out
}
