//! Pattern-completion environments.
//!
//! An environment is an immutable description of the task; states are plain
//! values passed in and returned. Transitions are deterministic.
//!
//! Each environment distinguishes its full `State` (what the agent sees)
//! from its `Pattern` (the configuration an oracle reasons about and
//! proposes). For cube stacking the two coincide. For grids the state adds
//! a sweep cursor on top of the cell matrix.

pub mod cube;
pub mod grid;
pub mod shapes;

use std::fmt::Debug;

use thiserror::Error;

pub use cube::{CubeAction, CubeEnv, CubeEnvConfig, CubeSpec, CubeStack};
pub use grid::{Grid, GridEnv, GridEnvConfig, GridMode, GridState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("illegal action {action} in state {state}")]
    IllegalAction { action: String, state: String },
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown target shape {0:?}")]
    UnknownShape(String),
}

/// Why text could not be turned into a pattern.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no list or matrix found in text")]
    NotFound,
    #[error("unknown cube label {0:?}")]
    UnknownLabel(String),
    #[error("cube label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("expected {expected} cubes in the proposed stack, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("matrix is {got_w}x{got_h}, expected {expected_w}x{expected_h}")]
    WrongDimensions {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("matrix entry {0:?} is not 0 or 1")]
    NonBinary(String),
}

impl ParseError {
    /// Parse failures that found a structure but one violating task constraints.
    pub fn is_constraint_violation(&self) -> bool {
        !matches!(self, ParseError::NotFound)
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub next: S,
    pub reward: f64,
    /// Bonus included in `reward` (zero when not granted).
    pub bonus: f64,
    /// True when the step completed the task. Horizon truncation is the caller's job.
    pub terminal: bool,
    /// E-difference of a proposal the environment refused to execute.
    /// Only the arrangement task produces these; zero elsewhere.
    pub rejected_delta: f64,
}

pub trait Environment: Clone + Send + Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;
    type Pattern: Clone + PartialEq + Debug + Send + Sync;

    /// Stable identifier used in cache keys and reports.
    fn id(&self) -> String;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&self) -> Self::State;
    fn legal_actions(&self, state: &Self::State) -> Vec<usize>;
    fn step(&self, state: &Self::State, action: usize) -> Result<StepOutcome<Self::State>, EnvError>;
    fn evaluate(&self, state: &Self::State) -> f64;

    fn pattern_of(&self, state: &Self::State) -> Self::Pattern;
    fn evaluate_pattern(&self, pattern: &Self::Pattern) -> f64;
    /// Acceptance test applied to oracle proposals.
    fn is_solution(&self, pattern: &Self::Pattern) -> bool;
    fn render_pattern(&self, pattern: &Self::Pattern) -> String;
    /// Lenient structural parse; see [`Environment::check_candidate`] for task constraints.
    fn parse_pattern(&self, text: &str) -> Result<Self::Pattern, ParseError>;
    /// Constraints a full proposed solution must satisfy beyond parsing.
    fn check_candidate(&self, pattern: &Self::Pattern) -> Result<(), ParseError>;
    /// Action suggested by an accepted solution, or `None` when nothing is left to do.
    fn policy_action(&self, solution: &Self::Pattern, state: &Self::State) -> Option<usize>;

    /// Canonical text key for tabular learners.
    fn state_key(&self, state: &Self::State) -> String;
    /// Dense input for the primary network.
    fn features(&self, state: &Self::State) -> Vec<f64>;
    /// Dense input for a network-backed query gate.
    fn gate_features(&self, state: &Self::State) -> Vec<f64>;
    /// Fraction of matched cells, for environments where that is meaningful.
    fn match_fraction(&self, pattern: &Self::Pattern) -> Option<f64>;
    /// Number of cells behind [`Environment::match_fraction`].
    fn cell_count(&self) -> Option<usize>;
}

/// Environments that a scripted oracle can answer for.
pub trait Extrapolate: Environment {
    /// How much of the target the pattern already shows, in `[0, 1]`.
    fn completion_fraction(&self, pattern: &Self::Pattern) -> f64;
    /// The correct full solution closest to `pattern`.
    fn correct_completion(&self, pattern: &Self::Pattern) -> Self::Pattern;
    /// A plausible but wrong completion that keeps what `pattern` already shows.
    fn corrupted_completion(&self, pattern: &Self::Pattern) -> Self::Pattern;
    /// Partial target containing roughly `fraction` of the solution.
    fn partial_target(&self, fraction: f64) -> Self::Pattern;
}
