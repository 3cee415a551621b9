use std::time::Instant;

use super::engine::{evaluate, run_round, RoundReport, RoundSettings, Strategy};
use super::state::RoundState;
use crate::baselines::Baseline;
use crate::config::{FederationConfig, StrategyName, TaskSpec};
use crate::data::{
    apply_annotation, dirichlet_partition, AnnotationKind, load_idx_images, ClientDataset, Dataset, GaussianTask, PartitionConfig,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;
use crate::nn::ModelArch;
use crate::seed;
use crate::suma::Suma;

/// Everything a run needs, materialized from a config.
pub struct Experiment {
    pub config: FederationConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub clients: Vec<ClientDataset>,
    pub dual_arch: ModelArch,
    pub residual_arch: Option<ModelArch>,
    pub strategy: Box<dyn Strategy>,
}

/// What one client holds after partitioning and annotation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClientSummary {
    pub client_id: usize,
    pub kind: AnnotationKind,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    /// Per-class sample counts over both subsets.
    pub class_counts: Vec<usize>,
    pub labeled_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub metrics: Vec<MetricsRecord>,
    pub reports: Vec<RoundReport>,
    pub final_state: RoundState,
}

fn load_task(spec: &TaskSpec, run_seed: u64) -> Result<(Dataset, Dataset)> {
    match spec {
        TaskSpec::Synthetic {
            classes,
            dim,
            n_per_class,
            test_per_class,
            spread,
            seed: task_seed,
        } => {
            let s = task_seed.unwrap_or(run_seed);
            let task = GaussianTask::new(*classes, *dim, *spread, s)?;
            let train = task.sample(*n_per_class, &mut seed::rng(s, &[seed::stream::TASK, 1]))?;
            let test = task.sample(*test_per_class, &mut seed::rng(s, &[seed::stream::TEST_SET]))?;
            Ok((train, test))
        }
        TaskSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            limit,
            test_limit,
            classes,
        } => {
            let train = load_idx_images(train_images, train_labels, *limit)?.with_class_count(*classes)?;
            let test = load_idx_images(test_images, test_labels, *test_limit)?.with_class_count(*classes)?;
            Ok((train, test))
        }
    }
}

/// Drops unlabeled samples until `Σ n_U ≈ ratio · Σ n_L`, keeping the same
/// seeded fraction on every client (and at least one sample per client).
fn trim_unlabeled(clients: &mut [ClientDataset], ratio: f64, run_seed: u64) {
    use rand::seq::SliceRandom;
    let n_l: usize = clients.iter().map(ClientDataset::n_labeled).sum();
    let n_u: usize = clients.iter().map(ClientDataset::n_unlabeled).sum();
    if n_u == 0 {
        return;
    }
    let keep_share = ((ratio * n_l as f64) / n_u as f64).min(1.0);
    for c in clients.iter_mut() {
        let n = c.n_unlabeled();
        if n == 0 {
            continue;
        }
        let mut keep = (keep_share * n as f64).round() as usize;
        if c.n_labeled() == 0 {
            keep = keep.max(1);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(run_seed, &[seed::stream::TRIM, c.client_id() as u64]));
        let mut kept = order[..keep.min(n)].to_vec();
        kept.sort_unstable();
        c.retain_unlabeled(&kept);
    }
}

impl Experiment {
    pub fn prepare(config: &FederationConfig) -> Result<Self> {
        config.validate()?;
        let (train, test) = load_task(&config.task, config.seed)?;
        if train.dim() != test.dim() {
            return Err(Error::data(format!(
                "train features have {} columns, test features {}",
                train.dim(),
                test.dim()
            )));
        }
        let partition = PartitionConfig {
            clients: config.clients,
            alpha: config.dirichlet_alpha,
            seed: seed::derive(config.seed, &[seed::stream::PARTITION]),
            min_samples_per_client: config.min_samples_per_client,
        };
        let parts = dirichlet_partition(&train, &partition)?;
        let pattern = config.annotation_pattern()?;
        let mut clients = apply_annotation(
            &parts,
            &train,
            &pattern,
            seed::derive(config.seed, &[seed::stream::ANNOTATION]),
        )?;
        if let Some(n) = config.active_clients {
            clients.truncate(n);
        }
        if let Some(ratio) = config.unlabeled_ratio {
            trim_unlabeled(&mut clients, ratio, config.seed);
        }

        let mut widths = vec![train.dim()];
        widths.extend(&config.hidden_layers);
        widths.push(train.class_count());
        let dual_arch = ModelArch::new(widths, config.activation)?;
        let residual_arch = match (config.strategy, config.residuals) {
            (StrategyName::Suma, true) => Some(dual_arch.scaled_hidden(config.residual_width_fraction)?),
            _ => None,
        };
        let strategy: Box<dyn Strategy> = match config.baseline_config() {
            None => Box::new(Suma::new(config.suma_hyperparams(), config.sgd())?),
            Some(b) => Box::new(Baseline::new(b, config.schedule())?),
        };
        Ok(Experiment {
            config: config.clone(),
            train,
            test,
            clients,
            dual_arch,
            residual_arch,
            strategy,
        })
    }

    pub fn client_summaries(&self) -> Vec<ClientSummary> {
        self.clients
            .iter()
            .map(|c| {
                let mut class_counts = vec![0; self.train.class_count()];
                for &i in c.labeled_source().iter().chain(c.unlabeled_source()) {
                    class_counts[self.train.labels()[i]] += 1;
                }
                ClientSummary {
                    client_id: c.client_id(),
                    kind: c.kind(),
                    n_labeled: c.n_labeled(),
                    n_unlabeled: c.n_unlabeled(),
                    class_counts,
                    labeled_indices: c.labeled_source().to_vec(),
                    unlabeled_indices: c.unlabeled_source().to_vec(),
                }
            })
            .collect()
    }

    pub fn initial_state(&self) -> Result<RoundState> {
        RoundState::initial(&self.dual_arch, self.residual_arch.as_ref(), self.config.seed)
    }

    /// Runs all configured rounds, evaluating on the test set after each.
    pub fn run(&self) -> Result<ExperimentOutput> {
        self.run_with(|_, _| {})
    }

    /// Like [`Experiment::run`], calling `observe` after every round.
    pub fn run_with(&self, mut observe: impl FnMut(&RoundState, &MetricsRecord)) -> Result<ExperimentOutput> {
        let settings = RoundSettings {
            selection_fraction: self.config.selection_fraction,
            run_seed: self.config.seed,
            parallel: self.config.parallel,
        };
        let mut state = self.initial_state()?;
        let mut metrics = Vec::with_capacity(self.config.rounds);
        let mut reports = Vec::with_capacity(self.config.rounds);
        for _ in 0..self.config.rounds {
            let start = Instant::now();
            let (next, report) = run_round(&state, &self.clients, &settings, self.strategy.as_ref())?;
            let acc = evaluate(self.strategy.as_ref(), &next, self.test.features(), self.test.labels())
                .map_err(|e| match e {
                    Error::Numerical { client, detail, .. } => Error::Numerical {
                        round: Some(report.round),
                        client,
                        detail,
                    },
                    other => other,
                })?;
            let record = MetricsRecord {
                round: next.round,
                acc_sm: acc.supervised,
                acc_um: acc.unsupervised,
                acc_em: acc.ensemble,
                loss_sup: report.loss_supervised,
                loss_unsup: report.loss_unsupervised,
                pseudo_acc: report.pseudo_accuracy,
                wall_ms: if self.config.record_timing {
                    start.elapsed().as_millis() as u64
                } else {
                    0
                },
            };
            observe(&next, &record);
            metrics.push(record);
            reports.push(report);
            state = next;
        }
        Ok(ExperimentOutput {
            metrics,
            reports,
            final_state: state,
        })
    }
}

/// Prepares and runs the experiment described by `config`.
pub fn run_experiment(config: &FederationConfig) -> Result<ExperimentOutput> {
    Experiment::prepare(config)?.run()
}
