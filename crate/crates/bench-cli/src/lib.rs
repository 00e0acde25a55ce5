//! Config-driven scenario runner for the `multiphase` library: bound
//! tables, estimator statistics and golden-fixture verification.

pub mod config;
pub mod scenarios;
pub mod table;
pub mod verify;

pub use config::{Scenario, ScenarioConfig};
pub use scenarios::run_scenario;
pub use table::{Format, ResultTable, Row};
pub use verify::{verify_fixtures, FixtureOutcome, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// Malformed or inconsistent configuration (exit status 2).
    #[error("config error: {0}")]
    Config(String),

    #[error("scenario `{scenario}`: {source}")]
    Module {
        scenario: String,
        #[source]
        source: multiphase::Error,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }
}
