use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fssl_core::config::load_config;
use fssl_core::federation::{Experiment, ExperimentOutput};
use fssl_core::plot::{emit_plot, PlotKind};
use fssl_core::suite::{run_suite, write_run_dir, SuiteName};
use fssl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "sim", about = "Federated semi-supervised learning simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        /// Directory for config.json, metrics.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the resolved config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run a named suite (main, ablation, annotation, unlabeled-scaling, ratio).
    Suite {
        name: String,
        base: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Render metrics CSVs as an SVG curve or bar chart.
    Plot {
        kind: String,
        out: PathBuf,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Show the client partition and annotation of a config.
    Partition {
        config: PathBuf,
        #[arg(long)]
        dump: PathBuf,
    },
}

const SUITE_PARTIAL_FAILURE: u8 = 3;

fn print_final(out: &ExperimentOutput) {
    if let Some(last) = out.metrics.last() {
        println!(
            "round {}: SM {:.4}  UM {:.4}  EM {:.4}",
            last.round, last.acc_sm, last.acc_um, last.acc_em
        );
    }
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            print_config,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if print_config {
                println!("{}", cfg.to_json_pretty());
                return Ok(0);
            }
            let output = Experiment::prepare(&cfg)?.run()?;
            print_final(&output);
            if let Some(dir) = out {
                write_run_dir(&dir, cfg.strategy.as_str(), &cfg, &output.metrics)?;
            }
            Ok(0)
        }
        Command::Suite { name, base, out } => {
            let name: SuiteName = name.parse()?;
            let cfg = load_config(&base)?;
            let outcome = run_suite(name, &cfg, Some(&out))?;
            for c in &outcome.summary.cells {
                println!(
                    "{:<20} SM {:.4}±{:.4}  UM {:.4}±{:.4}  EM {:.4}±{:.4}",
                    c.name, c.mean.sm, c.std.sm, c.mean.um, c.std.um, c.mean.em, c.std.em
                );
            }
            for f in &outcome.failures {
                eprintln!("failed: {} seed {}: {}", f.cell, f.seed, f.error);
            }
            Ok(if outcome.failures.is_empty() { 0 } else { SUITE_PARTIAL_FAILURE })
        }
        Command::Plot { kind, out, csv } => {
            let kind: PlotKind = kind.parse()?;
            emit_plot(kind, &csv, &out)?;
            Ok(0)
        }
        Command::Partition { config, dump } => {
            let cfg = load_config(&config)?;
            let exp = Experiment::prepare(&cfg)?;
            let text = serde_json::to_string_pretty(&exp.client_summaries()).expect("summaries serialize");
            std::fs::write(&dump, text + "\n").map_err(|e| Error::io(&dump, e))?;
            for c in exp.client_summaries() {
                println!(
                    "client {:>3}  {:<17} labeled {:>5}  unlabeled {:>5}",
                    c.client_id,
                    format!("{:?}", c.kind),
                    c.n_labeled,
                    c.n_unlabeled
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage mistakes count as configuration errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
