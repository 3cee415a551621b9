//! Named experiment grids, each cell repeated over three seeds.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AnnotationSpec, FederationConfig, StrategyName};
use crate::data::ClientAnnotation;
use crate::error::{Error, Result};
use crate::federation::run_experiment;
use crate::metrics::{save_csv, CellSummary, HeadTriple, MetricsRecord, Summary};
use crate::seed;

pub const REPEATS: usize = 3;

/// Label fractions of the main grid, as preset names.
pub const MAIN_PRESETS: [&str; 3] = ["5pct", "10pct", "20pct"];
pub const ANNOTATION_PRESETS: [&str; 5] = ["PL", "LPL", "UPL", "LU", "ALL"];
/// Unlabeled-client counts next to a fixed group of partially labeled clients.
pub const UNLABELED_COUNTS: [usize; 3] = [0, 5, 10];
pub const PARTIAL_CLIENTS: usize = 5;
pub const RATIOS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Main,
    Ablation,
    Annotation,
    UnlabeledScaling,
    Ratio,
}

impl SuiteName {
    pub const ALL: [SuiteName; 5] = [
        SuiteName::Main,
        SuiteName::Ablation,
        SuiteName::Annotation,
        SuiteName::UnlabeledScaling,
        SuiteName::Ratio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Main => "main",
            SuiteName::Ablation => "ablation",
            SuiteName::Annotation => "annotation",
            SuiteName::UnlabeledScaling => "unlabeled-scaling",
            SuiteName::Ratio => "ratio",
        }
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                Error::config(format!("unknown suite `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// One configuration of a suite; its seed is replaced per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCell {
    pub name: String,
    pub config: FederationConfig,
}

fn cell(name: impl Into<String>, config: FederationConfig) -> SuiteCell {
    SuiteCell {
        name: name.into(),
        config,
    }
}

/// Configurations of a suite, derived from `base`.
pub fn suite_cells(name: SuiteName, base: &FederationConfig) -> Result<Vec<SuiteCell>> {
    base.validate()?;
    let cells = match name {
        SuiteName::Main => {
            let strategies = [
                StrategyName::Suma,
                StrategyName::FedAvg,
                StrategyName::FedProx,
                StrategyName::FedPseudo,
            ];
            let mut cells = Vec::new();
            for preset in MAIN_PRESETS {
                for s in strategies {
                    let mut c = base.clone();
                    c.strategy = s;
                    c.annotation = AnnotationSpec::Preset(preset.to_string());
                    cells.push(cell(format!("{}-{preset}", s.as_str()), c));
                }
            }
            cells
        }
        SuiteName::Ablation => {
            let variants = [("gra+mpa", true, true), ("mpa", false, true), ("gra", true, false), ("none", false, false)];
            variants
                .into_iter()
                .map(|(label, residuals, proximity)| {
                    let mut c = base.clone();
                    c.strategy = StrategyName::Suma;
                    c.residuals = residuals;
                    if !proximity {
                        c.gamma = 0.0;
                    }
                    cell(label, c)
                })
                .collect()
        }
        SuiteName::Annotation => ANNOTATION_PRESETS
            .into_iter()
            .map(|p| {
                let mut c = base.clone();
                c.annotation = AnnotationSpec::Preset(p.to_string());
                cell(p, c)
            })
            .collect(),
        SuiteName::UnlabeledScaling => {
            let max = UNLABELED_COUNTS[UNLABELED_COUNTS.len() - 1];
            let frac = base.partial_fraction.unwrap_or(0.2);
            let mut pattern = vec![ClientAnnotation::Partial(frac); PARTIAL_CLIENTS];
            pattern.extend(std::iter::repeat_n(ClientAnnotation::None, max));
            UNLABELED_COUNTS
                .into_iter()
                .map(|n| {
                    let mut c = base.clone();
                    c.clients = PARTIAL_CLIENTS + max;
                    c.annotation = AnnotationSpec::Explicit(pattern.clone());
                    c.active_clients = Some(PARTIAL_CLIENTS + n);
                    cell(format!("unlabeled-{n}"), c)
                })
                .collect()
        }
        SuiteName::Ratio => RATIOS
            .into_iter()
            .map(|r| {
                let mut c = base.clone();
                c.unlabeled_ratio = Some(r);
                cell(format!("ratio-{r}"), c)
            })
            .collect(),
    };
    for c in &cells {
        c.config.validate()?;
    }
    Ok(cells)
}

/// Seeds of the repeats. Shared by every cell of a suite so that cells are
/// compared on the same partitions and initializations.
pub fn repeat_seeds(base_seed: u64) -> Vec<u64> {
    (0..REPEATS as u64)
        .map(|i| seed::derive(base_seed, &[seed::stream::SUITE, i]))
        .collect()
}

/// A run that did not finish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub cell: String,
    pub seed: u64,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub summary: Summary,
    pub failures: Vec<RunFailure>,
}

/// Writes a run directory: resolved config, per-round metrics and a
/// single-seed summary.
pub fn write_run_dir(dir: &Path, name: &str, config: &FederationConfig, metrics: &[MetricsRecord]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, config.to_json_pretty() + "\n").map_err(|e| Error::io(&cfg_path, e))?;
    save_csv(metrics, &dir.join("metrics.csv"))?;
    let summary = Summary {
        cells: metrics
            .last()
            .map(|last| vec![CellSummary::from_finals(name, vec![config.seed], &[HeadTriple::of(last)])])
            .unwrap_or_default(),
    };
    summary.save(&dir.join("summary.json"))
}

fn run_dir(out: &Path, cell: &str, seed: u64) -> PathBuf {
    out.join(cell).join(format!("seed-{seed}"))
}

/// Runs every cell × repeat, in parallel when `parallel` is set. Failed runs
/// are recorded and skipped; cells with no successful run are left out of
/// the summary.
pub fn run_cells(cells: &[SuiteCell], seeds: &[u64], out: Option<&Path>, parallel: bool) -> SuiteOutcome {
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let run = |&(c, s): &(usize, u64)| -> Result<Vec<MetricsRecord>> {
        let mut config = cells[c].config.clone();
        config.seed = s;
        let output = run_experiment(&config)?;
        if let Some(out) = out {
            write_run_dir(&run_dir(out, &cells[c].name, s), &cells[c].name, &config, &output.metrics)?;
        }
        Ok(output.metrics)
    };
    let results: Vec<Result<Vec<MetricsRecord>>> = if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };

    let mut summary = Summary::default();
    let mut failures = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let mut ok_seeds = Vec::new();
        let mut finals = Vec::new();
        for ((c, s), result) in jobs.iter().zip(&results) {
            if *c != ci {
                continue;
            }
            match result {
                Ok(m) => {
                    if let Some(last) = m.last() {
                        ok_seeds.push(*s);
                        finals.push(HeadTriple::of(last));
                    }
                }
                Err(e) => failures.push(RunFailure {
                    cell: cell.name.clone(),
                    seed: *s,
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                }),
            }
        }
        if !finals.is_empty() {
            summary
                .cells
                .push(CellSummary::from_finals(cell.name.clone(), ok_seeds, &finals));
        }
    }
    SuiteOutcome { summary, failures }
}

/// Builds and runs a named suite. With `out`, writes one run directory per
/// cell and seed, `summary.json` at the top and `failures.json` if any run
/// failed.
pub fn run_suite(name: SuiteName, base: &FederationConfig, out: Option<&Path>) -> Result<SuiteOutcome> {
    let cells = suite_cells(name, base)?;
    let outcome = run_cells(&cells, &repeat_seeds(base.seed), out, true);
    if let Some(out) = out {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        outcome.summary.save(&out.join("summary.json"))?;
        if !outcome.failures.is_empty() {
            let path = out.join("failures.json");
            let text = serde_json::to_string_pretty(&outcome.failures).expect("failures serialize");
            std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(outcome)
}
