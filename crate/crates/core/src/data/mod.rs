//! Datasets, Dirichlet client partitioning and per-client annotation.

mod annotation;
mod idx;
mod partition;
mod synth;

pub use annotation::{apply_annotation, AnnotationPattern, ClientAnnotation};
pub use idx::{load_idx_images, read_idx_images, read_idx_labels};
pub use partition::{dirichlet_partition, PartitionConfig};
pub use synth::{synth_gaussian_task, GaussianTask};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::data("a dataset needs at least one sample"));
        }
        if labels.len() != features.rows() {
            return Err(Error::data(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y >= class_count) {
            return Err(Error::data(format!(
                "label {} at index {i} is outside [0, {class_count})",
                labels[i]
            )));
        }
        if let Some(i) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "feature value at row {}, column {} is not finite",
                i / features.cols().max(1),
                i % features.cols().max(1)
            )));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
        })
    }

    /// Widens the class count, e.g. when a subset lacks the highest classes.
    pub fn with_class_count(mut self, class_count: usize) -> Result<Self> {
        if let Some(&y) = self.labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::data(format!("label {y} does not fit {class_count} classes")));
        }
        self.class_count = class_count;
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Indices of every sample of class `c`, ascending.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Writes `f0,...,f{d-1},label` followed by one row per sample.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim())
            .map(|j| format!("f{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, y) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                write!(out, "{v},")?;
            }
            writeln!(out, "{y}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// True labels of a client's unlabeled samples. Only the federation engine's
/// diagnostics can read them; local training never sees this field.
#[derive(Debug, Clone, PartialEq)]
pub struct SealedLabels(Vec<usize>);

impl SealedLabels {
    pub(crate) fn new(labels: Vec<usize>) -> Self {
        SealedLabels(labels)
    }

    pub(crate) fn reveal(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    FullyLabeled,
    PartiallyLabeled,
    Unlabeled,
}

/// One client's local data split into a labeled and an unlabeled subset.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    client_id: usize,
    labeled_features: Matrix,
    labels: Vec<usize>,
    unlabeled_features: Matrix,
    sealed: SealedLabels,
    /// Positions in the source dataset, for inspection dumps.
    labeled_source: Vec<usize>,
    unlabeled_source: Vec<usize>,
}

impl ClientDataset {
    pub(crate) fn from_indices(
        client_id: usize,
        data: &Dataset,
        labeled: Vec<usize>,
        unlabeled: Vec<usize>,
    ) -> Result<Self> {
        if labeled.is_empty() && unlabeled.is_empty() {
            return Err(Error::data(format!("client {client_id} has no samples")));
        }
        Ok(ClientDataset {
            client_id,
            labeled_features: data.features.select_rows(&labeled),
            labels: labeled.iter().map(|&i| data.labels[i]).collect(),
            unlabeled_features: data.features.select_rows(&unlabeled),
            sealed: SealedLabels::new(unlabeled.iter().map(|&i| data.labels[i]).collect()),
            labeled_source: labeled,
            unlabeled_source: unlabeled,
        })
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn labeled_features(&self) -> &Matrix {
        &self.labeled_features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn unlabeled_features(&self) -> &Matrix {
        &self.unlabeled_features
    }

    pub fn sealed_labels(&self) -> &SealedLabels {
        &self.sealed
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled_features.rows()
    }

    pub fn labeled_source(&self) -> &[usize] {
        &self.labeled_source
    }

    pub fn unlabeled_source(&self) -> &[usize] {
        &self.unlabeled_source
    }

    pub fn kind(&self) -> AnnotationKind {
        match (self.n_labeled(), self.n_unlabeled()) {
            (_, 0) => AnnotationKind::FullyLabeled,
            (0, _) => AnnotationKind::Unlabeled,
            _ => AnnotationKind::PartiallyLabeled,
        }
    }

    /// Keeps only the unlabeled samples at the given positions (in order).
    pub(crate) fn retain_unlabeled(&mut self, keep: &[usize]) {
        self.unlabeled_features = self.unlabeled_features.select_rows(keep);
        self.sealed = SealedLabels::new(keep.iter().map(|&i| self.sealed.0[i]).collect());
        self.unlabeled_source = keep.iter().map(|&i| self.unlabeled_source[i]).collect();
    }
}
