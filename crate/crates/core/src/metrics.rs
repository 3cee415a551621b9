//! Per-round metrics, their CSV form and run summaries.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "round",
    "acc_sm",
    "acc_um",
    "acc_em",
    "loss_sup",
    "loss_unsup",
    "pseudo_acc",
    "wall_ms",
];

/// Evaluation and training statistics after one round. Losses and
/// pseudo-label accuracy are absent in rounds where nothing produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: usize,
    pub acc_sm: f64,
    pub acc_um: f64,
    pub acc_em: f64,
    pub loss_sup: Option<f64>,
    pub loss_unsup: Option<f64>,
    pub pseudo_acc: Option<f64>,
    pub wall_ms: u64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv(records: &[MetricsRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::data(format!("writing metrics csv: {e}"));
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.acc_sm.to_string(),
            r.acc_um.to_string(),
            r.acc_em.to_string(),
            opt(r.loss_sup),
            opt(r.loss_unsup),
            opt(r.pseudo_acc),
            r.wall_ms.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::data(format!("writing metrics csv: {e}")))
}

pub fn read_csv(input: impl Read, name: &str) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::data(format!("{name}: {e}")))?
        .clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::data(format!(
            "{name}: unexpected header {:?}, expected {}",
            headers.iter().collect::<Vec<_>>(),
            CSV_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::data(format!("{name}: {e}")))?;
        let field = |i: usize| -> Result<Option<f64>> {
            let s = &row[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|e| {
                Error::data(format!("{name}: row {}: column {}: {e}", line + 2, CSV_HEADER[i]))
            })
        };
        let required = |i: usize| -> Result<f64> {
            field(i)?.ok_or_else(|| Error::data(format!("{name}: row {}: empty {}", line + 2, CSV_HEADER[i])))
        };
        out.push(MetricsRecord {
            round: required(0)? as usize,
            acc_sm: required(1)?,
            acc_um: required(2)?,
            acc_em: required(3)?,
            loss_sup: field(4)?,
            loss_unsup: field(5)?,
            pseudo_acc: field(6)?,
            wall_ms: required(7)? as u64,
        });
    }
    Ok(out)
}

pub fn save_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(records, std::io::BufWriter::new(file))
}

pub fn load_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string())
}

/// Final-round accuracies of the three heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadTriple {
    pub sm: f64,
    pub um: f64,
    pub em: f64,
}

impl HeadTriple {
    pub fn of(record: &MetricsRecord) -> Self {
        HeadTriple {
            sm: record.acc_sm,
            um: record.acc_um,
            em: record.acc_em,
        }
    }
}

/// Per-seed final accuracies of each head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAccuracies {
    pub sm: Vec<f64>,
    pub um: Vec<f64>,
    pub em: Vec<f64>,
}

/// One configuration of a suite, aggregated over its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(rename = "final")]
    pub finals: FinalAccuracies,
    pub mean: HeadTriple,
    /// Sample standard deviation (zero for a single seed).
    pub std: HeadTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl CellSummary {
    pub fn from_finals(name: impl Into<String>, seeds: Vec<u64>, finals: &[HeadTriple]) -> Self {
        let sm: Vec<f64> = finals.iter().map(|f| f.sm).collect();
        let um: Vec<f64> = finals.iter().map(|f| f.um).collect();
        let em: Vec<f64> = finals.iter().map(|f| f.em).collect();
        let (msm, ssm) = mean_std(&sm);
        let (mum, sum) = mean_std(&um);
        let (mem, sem) = mean_std(&em);
        CellSummary {
            name: name.into(),
            seeds,
            finals: FinalAccuracies { sm, um, em },
            mean: HeadTriple { sm: msm, um: mum, em: mem },
            std: HeadTriple { sm: ssm, um: sum, em: sem },
        }
    }
}

impl Summary {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
