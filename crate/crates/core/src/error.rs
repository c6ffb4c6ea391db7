use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading inputs, solving equilibria or computing metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("referential error: {0}")]
    Referential(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("no reachable network node for zones: {}", .0.join(", "))]
    UnattachedZones(Vec<String>),

    #[error("unreachable OD pairs with positive demand: {}", format_pairs(.0))]
    Infeasible(Vec<(String, String)>),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("dual variables exceeded bound {bound:e} (capacity constraints likely infeasible)")]
    DualUnbounded { bound: f64 },

    #[error("link sets differ: only in base [{}], only in scenario [{}]", .only_in_base.join(", "), .only_in_scenario.join(", "))]
    LinkSetMismatch {
        only_in_base: Vec<String>,
        only_in_scenario: Vec<String>,
    },

    #[error("sweep stopped at level {level}: {source}")]
    PartialSweep {
        level: f64,
        completed: Box<crate::analysis::SweepResult>,
        #[source]
        source: Box<Error>,
    },

    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(o, d)| format!("{o}->{d}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
