//! Two-armed query gate: arm 0 skips the oracle, arm 1 queries it.
//!
//! Every pull ends the bandit episode, so updates never bootstrap.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::rng::RngStream;

use super::adam::Adam;
use super::mlp::Mlp;
use super::select::select_action;
use super::tabular::TabularQ;
use super::AgentError;

pub const NO_QUERY: usize = 0;
pub const QUERY: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub alpha: f64,
    /// Kept for configuration fidelity; terminal updates never use it.
    pub gamma: f64,
    /// Hidden layers of the network-backed gate.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.95,
            hidden: vec![64, 64],
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
enum Store {
    Tabular(TabularQ),
    Net { net: Mlp, adam: Adam },
}

#[derive(Debug, Clone)]
pub struct BanditAgent {
    store: Store,
    updates: u64,
}

impl BanditAgent {
    pub fn tabular(config: &BanditConfig) -> Self {
        Self {
            store: Store::Tabular(TabularQ::new(2, config.alpha, config.gamma)),
            updates: 0,
        }
    }

    pub fn network(input_size: usize, config: &BanditConfig, rng: &mut RngStream) -> Result<Self, AgentError> {
        let mut sizes = vec![input_size];
        sizes.extend(&config.hidden);
        sizes.push(2);
        let net = Mlp::new(&sizes, rng)?;
        Ok(Self {
            store: Store::Net {
                adam: Adam::new(&net, config.learning_rate),
                net,
            },
            updates: 0,
        })
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self.store, Store::Tabular(_))
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn values<E: Environment>(&self, env: &E, state: &E::State) -> Result<[f64; 2], AgentError> {
        let v = match &self.store {
            Store::Tabular(q) => q.values(&env.state_key(state)),
            Store::Net { net, .. } => net.forward(&env.gate_features(state))?,
        };
        Ok([v[0], v[1]])
    }

    pub fn select<E: Environment>(
        &self,
        env: &E,
        state: &E::State,
        epsilon: f64,
        rng: &mut RngStream,
    ) -> Result<usize, AgentError> {
        select_action(&self.values(env, state)?, epsilon, rng)
    }

    /// Moves the chosen arm's value toward `reward`. Returns the value after the update.
    pub fn update<E: Environment>(
        &mut self,
        env: &E,
        state: &E::State,
        arm: usize,
        reward: f64,
    ) -> Result<f64, AgentError> {
        if arm > 1 {
            return Err(AgentError::Shape(format!("arm {arm} out of range")));
        }
        self.updates += 1;
        match &mut self.store {
            Store::Tabular(q) => Ok(q.update_terminal(&env.state_key(state), arm, reward)),
            Store::Net { net, adam } => {
                let x = Array1::from(env.gate_features(state)).insert_axis(ndarray::Axis(0));
                let acts = net.forward_batch(x.view())?;
                let mut grad = Array2::zeros((1, 2));
                grad[[0, arm]] = 2.0 * (acts.output[[0, arm]] - reward);
                let grads = net.backward(&acts, grad.view());
                adam.apply(net, &grads);
                let v = net.forward(&env.gate_features(state))?[arm];
                if !v.is_finite() {
                    return Err(AgentError::NonFinite(format!("gate value {v}")));
                }
                Ok(v)
            }
        }
    }
}
