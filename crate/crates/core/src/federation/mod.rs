//! Round engine: client selection, local-update dispatch and size-weighted
//! aggregation of the dual and residual models.

mod aggregate;
mod engine;
mod experiment;
mod select;
mod state;

pub use aggregate::{aggregate_weighted, Contribution};
pub use engine::{
    evaluate, run_round, ClientContext, ClientUpdate, HeadAccuracy, HeadLogits, LocalModels, PseudoLabelReport,
    RoundReport, RoundSettings, Strategy,
};
pub use experiment::{run_experiment, ClientSummary, Experiment, ExperimentOutput};
pub use select::{select_clients, select_ids, selection_size, SelectionResult};
pub use state::RoundState;
