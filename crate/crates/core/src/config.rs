//! JSON experiment configuration with documented defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, BaselineKind};
use crate::data::{AnnotationPattern, ClientAnnotation};
use crate::error::{Error, Result};
use crate::nn::{Activation, SgdConfig};
use crate::suma::SumaHyperparams;
use crate::train::LocalSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Suma,
    FedAvg,
    FedProx,
    FedPseudo,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Suma => "suma",
            StrategyName::FedAvg => "fedavg",
            StrategyName::FedProx => "fedprox",
            StrategyName::FedPseudo => "fedpseudo",
        }
    }
}

/// Either a preset name (`"ALL"`, `"10pct"`, ...) or one entry per client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationSpec {
    Preset(String),
    Explicit(Vec<ClientAnnotation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskSpec {
    /// Gaussian blobs; train and test sets share class means.
    Synthetic {
        #[serde(default = "defaults::classes")]
        classes: usize,
        #[serde(default = "defaults::dim")]
        dim: usize,
        #[serde(default = "defaults::n_per_class")]
        n_per_class: usize,
        #[serde(default = "defaults::test_per_class")]
        test_per_class: usize,
        #[serde(default = "defaults::spread")]
        spread: f64,
        /// Seed of the class means and samples; the run seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
        #[serde(default = "defaults::idx_classes")]
        classes: usize,
    },
}

mod defaults {
    use super::AnnotationSpec;

    pub fn classes() -> usize {
        4
    }
    pub fn dim() -> usize {
        16
    }
    pub fn n_per_class() -> usize {
        250
    }
    pub fn test_per_class() -> usize {
        250
    }
    pub fn spread() -> f64 {
        0.5
    }
    pub fn idx_classes() -> usize {
        10
    }
    pub fn clients() -> usize {
        20
    }
    pub fn selection_fraction() -> f64 {
        0.4
    }
    pub fn rounds() -> usize {
        30
    }
    pub fn learning_rate() -> f64 {
        0.1
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn lambda() -> f64 {
        1.0
    }
    pub fn gamma() -> f64 {
        0.01
    }
    pub fn tau() -> f64 {
        3.0
    }
    pub fn local_epochs() -> usize {
        5
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn dirichlet_alpha() -> f64 {
        0.1
    }
    pub fn min_samples() -> usize {
        2
    }
    pub fn annotation() -> AnnotationSpec {
        AnnotationSpec::Preset("ALL".into())
    }
    pub fn residual_width_fraction() -> f64 {
        0.25
    }
    pub fn yes() -> bool {
        true
    }
    pub fn hidden_layers() -> Vec<usize> {
        vec![32]
    }
    pub fn fedprox_mu() -> f64 {
        0.01
    }
    pub fn pseudo_threshold() -> f64 {
        0.95
    }
}

/// Every setting of one experiment. Only `task` and `strategy` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    pub task: TaskSpec,
    pub strategy: StrategyName,
    #[serde(default = "defaults::clients")]
    pub clients: usize,
    #[serde(default = "defaults::selection_fraction")]
    pub selection_fraction: f64,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::momentum")]
    pub momentum: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default)]
    pub proximity_squared: bool,
    #[serde(default = "defaults::local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::dirichlet_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default = "defaults::min_samples")]
    pub min_samples_per_client: usize,
    #[serde(default = "defaults::annotation")]
    pub annotation: AnnotationSpec,
    /// Overrides the labeled fraction of partially labeled clients in presets.
    #[serde(default)]
    pub partial_fraction: Option<f64>,
    /// Residual hidden widths relative to the dual model's.
    #[serde(default = "defaults::residual_width_fraction")]
    pub residual_width_fraction: f64,
    /// Residual alignment on/off (SUMA only).
    #[serde(default = "defaults::yes")]
    pub residuals: bool,
    #[serde(default = "defaults::hidden_layers")]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// SUMA pseudo-label confidence threshold; off when absent.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "defaults::fedprox_mu")]
    pub fedprox_mu: f64,
    #[serde(default = "defaults::pseudo_threshold")]
    pub pseudo_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Run selected clients' local updates on a thread pool.
    #[serde(default)]
    pub parallel: bool,
    /// Keep only the first N clients after annotation.
    #[serde(default)]
    pub active_clients: Option<usize>,
    /// Trim unlabeled data so that Σ n_U ≈ ratio · Σ n_L.
    #[serde(default)]
    pub unlabeled_ratio: Option<f64>,
    /// Record wall-clock time per round. Off by default so metric files stay
    /// byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
}

impl FederationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FederationConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("{e}"))
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(annotate_line(text, &msg)),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn range(key: &str, ok: bool, expected: &str, got: impl std::fmt::Display) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("key `{key}`: expected {expected}, got {got}")))
            }
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        range("clients", self.clients >= 1, "an integer >= 1", self.clients)?;
        range(
            "selection_fraction",
            self.selection_fraction > 0.0 && self.selection_fraction <= 1.0,
            "a value in (0, 1]",
            self.selection_fraction,
        )?;
        range(
            "learning_rate",
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "a value > 0",
            self.learning_rate,
        )?;
        range("momentum", (0.0..1.0).contains(&self.momentum), "a value in [0, 1)", self.momentum)?;
        range("lambda", finite_nonneg(self.lambda), "a value >= 0", self.lambda)?;
        range("gamma", finite_nonneg(self.gamma), "a value >= 0", self.gamma)?;
        range("tau", self.tau > 0.0 && self.tau.is_finite(), "a value > 0", self.tau)?;
        range("local_epochs", self.local_epochs >= 1, "an integer >= 1", self.local_epochs)?;
        range("batch_size", self.batch_size >= 1, "an integer >= 1", self.batch_size)?;
        range(
            "dirichlet_alpha",
            self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite(),
            "a value > 0",
            self.dirichlet_alpha,
        )?;
        range(
            "min_samples_per_client",
            self.min_samples_per_client >= 1,
            "an integer >= 1",
            self.min_samples_per_client,
        )?;
        range(
            "residual_width_fraction",
            self.residual_width_fraction > 0.0 && self.residual_width_fraction <= 1.0,
            "a value in (0, 1]",
            self.residual_width_fraction,
        )?;
        range(
            "hidden_layers",
            !self.hidden_layers.contains(&0),
            "positive widths",
            format!("{:?}", self.hidden_layers),
        )?;
        if let Some(t) = self.threshold {
            range("threshold", t > 0.0 && t < 1.0, "a value in (0, 1)", t)?;
        }
        if let Some(p) = self.partial_fraction {
            range("partial_fraction", p > 0.0 && p < 1.0, "a value in (0, 1)", p)?;
        }
        range("fedprox_mu", finite_nonneg(self.fedprox_mu), "a value >= 0", self.fedprox_mu)?;
        range(
            "pseudo_threshold",
            self.pseudo_threshold > 0.0 && self.pseudo_threshold < 1.0,
            "a value in (0, 1)",
            self.pseudo_threshold,
        )?;
        if let Some(n) = self.active_clients {
            range(
                "active_clients",
                n >= 1 && n <= self.clients,
                &format!("an integer in [1, {}]", self.clients),
                n,
            )?;
        }
        if let Some(r) = self.unlabeled_ratio {
            range("unlabeled_ratio", r.is_finite() && r >= 0.0, "a value >= 0", r)?;
        }
        match &self.task {
            TaskSpec::Synthetic {
                classes,
                dim,
                n_per_class,
                test_per_class,
                spread,
                ..
            } => {
                range("task.classes", *classes >= 2, "an integer >= 2", classes)?;
                range("task.dim", *dim >= 2, "an integer >= 2", dim)?;
                range("task.n_per_class", *n_per_class >= 1, "an integer >= 1", n_per_class)?;
                range("task.test_per_class", *test_per_class >= 1, "an integer >= 1", test_per_class)?;
                range("task.spread", *spread > 0.0 && spread.is_finite(), "a value > 0", spread)?;
            }
            TaskSpec::Idx { classes, .. } => {
                range("task.classes", *classes >= 2, "an integer >= 2", classes)?;
            }
        }
        self.annotation_pattern()?;
        Ok(())
    }

    /// The annotation pattern with presets expanded for `clients`.
    pub fn annotation_pattern(&self) -> Result<AnnotationPattern> {
        let pattern = match &self.annotation {
            AnnotationSpec::Preset(name) => AnnotationPattern::preset(name, self.clients, self.partial_fraction),
            AnnotationSpec::Explicit(list) => AnnotationPattern::new(list.clone()),
        }
        .map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("key `annotation`: {msg}")),
            other => other,
        })?;
        if pattern.len() != self.clients {
            return Err(Error::config(format!(
                "key `annotation`: expected {} entries (one per client), got {}",
                self.clients,
                pattern.len()
            )));
        }
        Ok(pattern)
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
    }

    pub fn schedule(&self) -> LocalSchedule {
        LocalSchedule {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            sgd: self.sgd(),
        }
    }

    pub fn suma_hyperparams(&self) -> SumaHyperparams {
        SumaHyperparams {
            lambda: self.lambda,
            gamma: self.gamma,
            tau: self.tau,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            threshold: self.threshold,
            proximity_squared: self.proximity_squared,
        }
    }

    pub fn baseline_config(&self) -> Option<BaselineConfig> {
        let kind = match self.strategy {
            StrategyName::Suma => return None,
            StrategyName::FedAvg => BaselineKind::FedAvg,
            StrategyName::FedProx => BaselineKind::FedProx,
            StrategyName::FedPseudo => BaselineKind::FedPseudo,
        };
        Some(BaselineConfig {
            kind,
            mu_prox: self.fedprox_mu,
            threshold: self.pseudo_threshold,
        })
    }
}

/// Appends the line of the first occurrence of the offending key.
fn annotate_line(text: &str, msg: &str) -> String {
    let key = msg
        .strip_prefix("key `")
        .and_then(|rest| rest.split('`').next())
        .map(|k| k.rsplit('.').next().unwrap_or(k));
    let line = key.and_then(|k| {
        let quoted = format!("\"{k}\"");
        text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
    });
    match line {
        Some(n) => format!("{msg} (line {n})"),
        None => msg.to_string(),
    }
}

pub fn load_config(path: &Path) -> Result<FederationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FederationConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
