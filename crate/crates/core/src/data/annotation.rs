use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::seed;

/// Annotation status requested for one client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientAnnotation {
    Full,
    /// Fraction of the client's samples that keep their labels, in (0, 1).
    Partial(f64),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationPattern {
    clients: Vec<ClientAnnotation>,
}

/// Built-in layouts for 20 clients: `(fully labeled, partially labeled,
/// unlabeled, labeled fraction of each partial client)`. Partial fractions
/// put the overall labeled share at the preset's nominal percentage when
/// clients are equally sized; the mixed-kind presets sit at 10%.
const PRESETS: &[(&str, usize, usize, usize, f64)] = &[
    ("5pct", 0, 2, 18, 0.5),
    ("10pct", 1, 9, 10, 1.0 / 9.0),
    ("20pct", 2, 8, 10, 0.25),
    ("PL", 0, 20, 0, 0.1),
    ("LPL", 1, 19, 0, 1.0 / 19.0),
    ("UPL", 0, 10, 10, 0.2),
    ("LU", 2, 0, 18, 0.0),
    ("ALL", 1, 9, 10, 1.0 / 9.0),
];

impl AnnotationPattern {
    pub fn new(clients: Vec<ClientAnnotation>) -> Result<Self> {
        for (k, c) in clients.iter().enumerate() {
            if let ClientAnnotation::Partial(p) = c {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::config(format!(
                        "client {k}: partial label fraction must lie in (0, 1), got {p}"
                    )));
                }
            }
        }
        if clients.is_empty() {
            return Err(Error::config("annotation pattern must cover at least one client"));
        }
        Ok(AnnotationPattern { clients })
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|p| p.0)
    }

    /// Expands a named preset for `k` clients. Counts are scaled from the
    /// 20-client layout; `partial_fraction` overrides the preset's fraction.
    pub fn preset(name: &str, k: usize, partial_fraction: Option<f64>) -> Result<Self> {
        let &(_, full, partial, none, frac) = PRESETS
            .iter()
            .find(|p| p.0.eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown annotation preset {name:?}; known presets: {}",
                    Self::preset_names().collect::<Vec<_>>().join(", ")
                ))
            })?;
        if k == 0 {
            return Err(Error::config("annotation preset needs at least one client"));
        }
        let (n_full, n_none) = if k == 20 {
            (full, none)
        } else {
            let scale = |n: usize| (n as f64 * k as f64 / 20.0).round() as usize;
            let n_full = scale(full).min(k);
            (n_full, scale(none).min(k - n_full))
        };
        let mut n_partial = k - n_full - n_none;
        let mut n_none = n_none;
        if partial == 0 {
            n_none += n_partial;
            n_partial = 0;
        }
        let frac = partial_fraction.unwrap_or(frac);
        let mut clients = vec![ClientAnnotation::Full; n_full];
        clients.extend(std::iter::repeat_n(ClientAnnotation::Partial(frac), n_partial));
        clients.extend(std::iter::repeat_n(ClientAnnotation::None, n_none));
        AnnotationPattern::new(clients)
    }

    pub fn clients(&self) -> &[ClientAnnotation] {
        &self.clients
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }
}

/// Builds client datasets from partition index lists. Partial clients keep
/// labels on a seeded uniform sample of `round(p·n_k)` of their samples,
/// clamped so a client with two or more samples stays partially labeled.
pub fn apply_annotation(
    parts: &[Vec<usize>],
    data: &Dataset,
    pattern: &AnnotationPattern,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    if parts.len() != pattern.len() {
        return Err(Error::config(format!(
            "annotation pattern covers {} clients but the partition has {}",
            pattern.len(),
            parts.len()
        )));
    }
    parts
        .iter()
        .zip(pattern.clients())
        .enumerate()
        .map(|(k, (indices, spec))| {
            let (labeled, unlabeled) = match *spec {
                ClientAnnotation::Full => (indices.clone(), Vec::new()),
                ClientAnnotation::None => (Vec::new(), indices.clone()),
                ClientAnnotation::Partial(p) => {
                    let n = indices.len();
                    let mut n_lab = (p * n as f64).round() as usize;
                    if n >= 2 {
                        n_lab = n_lab.clamp(1, n - 1);
                    }
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut seed::rng(seed, &[seed::stream::ANNOTATION, k as u64]));
                    let mut chosen = order[..n_lab].to_vec();
                    let mut rest = order[n_lab..].to_vec();
                    chosen.sort_unstable();
                    rest.sort_unstable();
                    (
                        chosen.into_iter().map(|i| indices[i]).collect(),
                        rest.into_iter().map(|i| indices[i]).collect(),
                    )
                }
            };
            ClientDataset::from_indices(k, data, labeled, unlabeled)
        })
        .collect()
}
