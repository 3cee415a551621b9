use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    pub(crate) fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Layer widths of a dense network, input first and class count last.
/// The activation is applied to hidden layers only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArch {
    layer_widths: Vec<usize>,
    activation: Activation,
}

/// Location of one affine layer inside a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Start of the `fan_in x fan_out` row-major weight block.
    pub weights: usize,
    /// Start of the `fan_out` bias block.
    pub bias: usize,
}

impl ModelArch {
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::config(format!(
                "an architecture needs at least input and output widths, got {layer_widths:?}"
            )));
        }
        if layer_widths.contains(&0) {
            return Err(Error::config(format!(
                "layer widths must be positive, got {layer_widths:?}"
            )));
        }
        Ok(ModelArch {
            layer_widths,
            activation,
        })
    }

    /// Same input and output widths with every hidden width scaled by `fraction`
    /// (rounded, at least 1).
    pub fn scaled_hidden(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!(
                "hidden width fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let last = self.layer_widths.len() - 1;
        let widths = self
            .layer_widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                if i == 0 || i == last {
                    w
                } else {
                    ((w as f64 * fraction).round() as usize).max(1)
                }
            })
            .collect();
        ModelArch::new(widths, self.activation)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_widths.last().expect("validated non-empty")
    }

    pub fn layer_count(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub(crate) fn spans(&self) -> Vec<LayerSpan> {
        let mut offset = 0;
        self.layer_widths
            .windows(2)
            .map(|w| {
                let span = LayerSpan {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    bias: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                span
            })
            .collect()
    }
}

/// Flat parameter vector in layer-major order; each layer stores its
/// `fan_in x fan_out` weights row-major followed by `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: ModelArch,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: ModelArch) -> Self {
        let n = arch.param_count();
        ModelParams {
            arch,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(arch: ModelArch, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.param_count() {
            return Err(Error::config(format!(
                "parameter vector has {} entries, architecture {:?} needs {}",
                values.len(),
                arch.layer_widths(),
                arch.param_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("parameter {i} is not finite")));
        }
        Ok(ModelParams { arch, values })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_glorot(arch: ModelArch, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ModelParams::zeros(arch);
        for span in params.arch.spans() {
            let limit = (6.0 / (span.fan_in + span.fan_out) as f64).sqrt();
            for w in &mut params.values[span.weights..span.bias] {
                *w = rng.gen_range(-limit..=limit);
            }
        }
        params
    }

    /// Glorot init with the output layer zeroed, so the network outputs all-zero logits.
    pub fn init_zero_output(arch: ModelArch, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ModelParams::init_glorot(arch, rng);
        let last = *params.arch.spans().last().expect("at least one layer");
        params.values[last.weights..last.bias + last.fan_out].fill(0.0);
        params
    }

    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn ensure_same_arch(&self, other: &ModelParams) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::config(format!(
                "architecture mismatch: {:?} vs {:?}",
                self.arch.layer_widths(),
                other.arch.layer_widths()
            )));
        }
        Ok(())
    }

    /// Euclidean distance between two parameter vectors of the same architecture.
    pub fn distance(&self, other: &ModelParams) -> Result<f64> {
        self.ensure_same_arch(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Gradient aligned element-for-element with a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        GradientVector {
            values: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GradientVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &GradientVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::config(format!(
                "gradient length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }
}
