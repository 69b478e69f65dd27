//! Deep Q-network agent: online and target networks, replay, Adam.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

use super::adam::Adam;
use super::mlp::Mlp;
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Train steps between target-network copies; 1 keeps the target equal to the online net.
    pub target_sync: usize,
}

impl DqnConfig {
    /// 128x128 hidden layers, batch 32.
    pub fn image() -> Self {
        Self {
            hidden: vec![128, 128],
            learning_rate: 1e-3,
            gamma: 0.95,
            batch_size: 32,
            buffer_capacity: 10_000,
            target_sync: 100,
        }
    }

    /// 64x64 hidden layers, batch 16.
    pub fn arrangement() -> Self {
        Self {
            hidden: vec![64, 64],
            batch_size: 16,
            ..Self::image()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(AgentError::Config(format!(
                "batch size {} must be positive and at most the buffer capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.target_sync == 0 {
            return Err(AgentError::Config("target_sync must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.learning_rate > 0.0) {
            return Err(AgentError::Config("gamma must be in [0,1] and learning rate positive".into()));
        }
        Ok(())
    }
}

/// One regression step on a replay minibatch.
///
/// Targets are `r + gamma * max_a' target(s')[a'] * (1 - terminal)`; the loss is
/// the mean squared error on the taken action's output only. Returns the loss
/// before the update.
pub fn dqn_train_step(
    net: &mut Mlp,
    adam: &mut Adam,
    buffer: &ReplayBuffer,
    batch: usize,
    gamma: f64,
    target_net: &Mlp,
    rng: &mut RngStream,
) -> Result<f64, AgentError> {
    let sample = buffer.sample(batch, rng)?;
    let n_in = net.input_size();
    let mut states = Array2::zeros((batch, n_in));
    let mut next_states = Array2::zeros((batch, n_in));
    for (i, t) in sample.iter().enumerate() {
        if t.state.len() != n_in || t.next_state.len() != n_in {
            return Err(AgentError::Shape(format!(
                "transition has {} features, network expects {n_in}",
                t.state.len()
            )));
        }
        states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
        next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
    }
    let next_q = target_net.forward_batch(next_states.view())?.output;
    let acts = net.forward_batch(states.view())?;
    let mut grad = Array2::zeros(acts.output.raw_dim());
    let mut loss = 0.0;
    for (i, t) in sample.iter().enumerate() {
        let bootstrap = if t.terminal {
            0.0
        } else {
            next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let y = t.reward + gamma * bootstrap;
        let err = acts.output[[i, t.action]] - y;
        loss += err * err;
        grad[[i, t.action]] = 2.0 * err / batch as f64;
    }
    loss /= batch as f64;
    if !loss.is_finite() {
        return Err(AgentError::NonFinite(format!(
            "DQN loss is {loss} after {} optimizer steps",
            adam.steps()
        )));
    }
    let grads = net.backward(&acts, grad.view());
    adam.apply(net, &grads);
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    online: Mlp,
    target: Mlp,
    adam: Adam,
    buffer: ReplayBuffer,
    train_steps: u64,
    rng: RngStream,
}

impl DqnAgent {
    /// `init_rng` seeds the weights; `replay_rng` drives minibatch sampling.
    pub fn new(
        input_size: usize,
        num_actions: usize,
        config: DqnConfig,
        init_rng: &mut RngStream,
        replay_rng: RngStream,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        let mut sizes = vec![input_size];
        sizes.extend(&config.hidden);
        sizes.push(num_actions);
        let online = Mlp::new(&sizes, init_rng)?;
        Ok(Self {
            target: online.clone(),
            adam: Adam::new(&online, config.learning_rate),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            online,
            config,
            train_steps: 0,
            rng: replay_rng,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn network(&self) -> &Mlp {
        &self.online
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.online.forward(features)
    }

    /// Stores the transition and, once the buffer holds a batch, trains one step.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<f64>, AgentError> {
        self.buffer.push(transition);
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let loss = dqn_train_step(
            &mut self.online,
            &mut self.adam,
            &self.buffer,
            self.config.batch_size,
            self.config.gamma,
            &self.target,
            &mut self.rng,
        )?;
        self.train_steps += 1;
        if self.train_steps % self.config.target_sync as u64 == 0 {
            self.target.copy_from(&self.online);
        }
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn transition(state: Vec<f64>, action: usize, reward: f64, terminal: bool) -> Transition {
        Transition {
            next_state: state.clone(),
            state,
            action,
            reward,
            terminal,
        }
    }

    #[test]
    fn converges_on_repeated_terminal_transition() {
        let mut rng = make_rng(1);
        let mut net = Mlp::new(&[4, 16, 16, 2], &mut rng).unwrap();
        let target = net.clone();
        let mut adam = Adam::new(&net, 1e-3);
        let mut buf = ReplayBuffer::new(64);
        let s = vec![0.5, -0.25, 1.0, 0.0];
        for _ in 0..64 {
            buf.push(transition(s.clone(), 1, 1.0, true));
        }
        for _ in 0..2000 {
            dqn_train_step(&mut net, &mut adam, &buf, 16, 0.95, &target, &mut rng).unwrap();
        }
        let q = net.forward(&s).unwrap();
        assert!((q[1] - 1.0).abs() < 1e-2, "{q:?}");
    }

    #[test]
    fn gamma_zero_regresses_to_reward() {
        // a non-terminal transition with gamma = 0 must behave like a terminal one
        let mut rng = make_rng(2);
        let mut net = Mlp::new(&[2, 8, 2], &mut rng).unwrap();
        let target = net.clone();
        let mut adam = Adam::new(&net, 1e-2);
        let mut buf = ReplayBuffer::new(8);
        for _ in 0..8 {
            buf.push(transition(vec![1.0, 0.0], 0, -0.5, false));
        }
        for _ in 0..1500 {
            dqn_train_step(&mut net, &mut adam, &buf, 4, 0.0, &target, &mut rng).unwrap();
        }
        assert!((net.forward(&[1.0, 0.0]).unwrap()[0] + 0.5).abs() < 1e-2);
    }

    #[test]
    fn untaken_action_is_not_trained() {
        let mut rng = make_rng(4);
        let mut net = Mlp::new(&[2, 2], &mut rng).unwrap();
        let before = net.forward(&[1.0, 1.0]).unwrap();
        let target = net.clone();
        let mut adam = Adam::new(&net, 1e-2);
        let mut buf = ReplayBuffer::new(4);
        for _ in 0..4 {
            buf.push(transition(vec![1.0, 1.0], 0, 5.0, true));
        }
        dqn_train_step(&mut net, &mut adam, &buf, 4, 0.9, &target, &mut rng).unwrap();
        let after = net.forward(&[1.0, 1.0]).unwrap();
        // single linear layer: output 1 depends only on its own column
        assert_eq!(before[1], after[1]);
        assert_ne!(before[0], after[0]);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut rng = make_rng(0);
        let mut net = Mlp::new(&[1, 2], &mut rng).unwrap();
        let target = net.clone();
        let mut adam = Adam::new(&net, 1e-3);
        let mut buf = ReplayBuffer::new(2);
        buf.push(transition(vec![1.0], 0, f64::INFINITY, true));
        assert!(matches!(
            dqn_train_step(&mut net, &mut adam, &buf, 1, 0.9, &target, &mut rng),
            Err(AgentError::NonFinite(_))
        ));
    }

    #[test]
    fn agent_trains_once_batch_is_available() {
        let mut init = make_rng(0);
        let mut agent = DqnAgent::new(
            3,
            2,
            DqnConfig {
                hidden: vec![4],
                batch_size: 2,
                buffer_capacity: 10,
                target_sync: 1,
                ..DqnConfig::image()
            },
            &mut init,
            make_rng(1),
        )
        .unwrap();
        assert_eq!(agent.observe(transition(vec![0.0; 3], 0, 0.0, false)).unwrap(), None);
        assert!(agent.observe(transition(vec![1.0; 3], 1, 1.0, true)).unwrap().is_some());
        assert_eq!(agent.train_steps(), 1);
        assert_eq!(agent.q_values(&[0.0; 3]).unwrap().len(), 2);
    }
}
