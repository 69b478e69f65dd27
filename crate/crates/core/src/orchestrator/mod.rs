//! The LaGR control loop, baselines, and experiment aggregation.

pub mod config;
pub mod experiment;
pub mod reward;
pub mod trial;

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::oracle::OracleError;
use crate::schedule::ScheduleError;

pub use config::{AnyEnv, EnvSpec, Gating, OracleSpec, PrimaryConfig, RunConfig, SecondaryKind, SecondaryRewardMode};
pub use experiment::{
    aggregate, mean_stderr, performance_ratio, run_experiment, run_trials, Aggregate, ExperimentResult, MeanStderr,
    Variant,
};
pub use reward::{logistic, logistic_reward, secondary_reward};
pub use trial::{run_baseline, run_trial, QueryRecord, TrialMetrics};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("performance ratio undefined: baseline total return is {0}")]
    Ratio(f64),
}
