//! Learners: tabular Q, a small DQN, and the two-armed query gate.

pub mod adam;
pub mod bandit;
pub mod dqn;
pub mod gradcheck;
pub mod mlp;
pub mod replay;
pub mod select;
pub mod tabular;

use thiserror::Error;

use crate::env::Environment;
use crate::rng::RngStream;

pub use bandit::{BanditAgent, BanditConfig, NO_QUERY, QUERY};
pub use dqn::{DqnAgent, DqnConfig};
pub use mlp::Mlp;
pub use replay::{ReplayBuffer, Transition};
pub use select::select_action;
pub use tabular::{q_update, TabularQ};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad weight snapshot: {0}")]
    Snapshot(String),
    #[error("no legal action available")]
    EmptyLegalSet,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

/// The learner acting in the environment.
#[derive(Debug, Clone)]
pub enum PrimaryLearner {
    Tabular(TabularQ),
    Dqn(DqnAgent),
}

impl PrimaryLearner {
    /// Action values for every action id (illegal ones included).
    pub fn action_values<E: Environment>(&self, env: &E, state: &E::State) -> Result<Vec<f64>, AgentError> {
        match self {
            PrimaryLearner::Tabular(q) => Ok(q.values(&env.state_key(state))),
            PrimaryLearner::Dqn(d) => d.q_values(&env.features(state)),
        }
    }

    /// Epsilon-greedy choice restricted to the legal actions of `state`.
    pub fn choose<E: Environment>(
        &self,
        env: &E,
        state: &E::State,
        epsilon: f64,
        rng: &mut RngStream,
    ) -> Result<usize, AgentError> {
        let legal = env.legal_actions(state);
        let all = self.action_values(env, state)?;
        let values: Vec<f64> = legal.iter().map(|&a| all[a]).collect();
        Ok(legal[select_action(&values, epsilon, rng)?])
    }

    pub fn learn<E: Environment>(
        &mut self,
        env: &E,
        state: &E::State,
        action: usize,
        reward: f64,
        next: &E::State,
        terminal: bool,
    ) -> Result<(), AgentError> {
        match self {
            PrimaryLearner::Tabular(q) => {
                let legal_next = if terminal { Vec::new() } else { env.legal_actions(next) };
                q.update(
                    &env.state_key(state),
                    action,
                    reward,
                    &env.state_key(next),
                    &legal_next,
                    terminal,
                )?;
            }
            PrimaryLearner::Dqn(d) => {
                d.observe(Transition {
                    state: env.features(state),
                    action,
                    reward,
                    next_state: env.features(next),
                    terminal,
                })?;
            }
        }
        Ok(())
    }
}
