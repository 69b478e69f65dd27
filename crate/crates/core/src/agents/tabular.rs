use std::collections::HashMap;

use super::AgentError;

/// State-keyed action-value table. Unseen entries read as zero.
#[derive(Debug, Clone)]
pub struct TabularQ {
    table: HashMap<String, Vec<f64>>,
    num_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl TabularQ {
    pub fn new(num_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            table: HashMap::new(),
            num_actions,
            alpha,
            gamma,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, key: &str, action: usize) -> f64 {
        self.table.get(key).map_or(0.0, |row| row[action])
    }

    pub fn values(&self, key: &str) -> Vec<f64> {
        self.table
            .get(key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_actions])
    }

    fn entry(&mut self, key: &str) -> &mut Vec<f64> {
        if !self.table.contains_key(key) {
            self.table.insert(key.to_string(), vec![0.0; self.num_actions]);
        }
        self.table.get_mut(key).expect("row just inserted")
    }

    pub fn set(&mut self, key: &str, action: usize, value: f64) {
        self.entry(key)[action] = value;
    }

    /// One Q-learning backup. Returns the new value of `Q(key, action)`.
    ///
    /// `Q(s,a) += alpha * (r + gamma * max_{a' in legal_next} Q(s',a') * (1 - terminal) - Q(s,a))`
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        key: &str,
        action: usize,
        reward: f64,
        next_key: &str,
        legal_next: &[usize],
        terminal: bool,
    ) -> Result<f64, AgentError> {
        let bootstrap = if terminal {
            0.0
        } else {
            if legal_next.is_empty() {
                return Err(AgentError::EmptyLegalSet);
            }
            let next = self.table.get(next_key);
            legal_next
                .iter()
                .map(|&a| next.map_or(0.0, |row| row[a]))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let target = reward + self.gamma * bootstrap;
        let alpha = self.alpha;
        let q = &mut self.entry(key)[action];
        *q += alpha * (target - *q);
        if !q.is_finite() {
            return Err(AgentError::NonFinite(format!("Q({key}, {action}) = {q}")));
        }
        Ok(*q)
    }

    /// Terminal update used by the query gate: `Q(s,a) += alpha * (r - Q(s,a))`.
    pub fn update_terminal(&mut self, key: &str, action: usize, reward: f64) -> f64 {
        let alpha = self.alpha;
        let q = &mut self.entry(key)[action];
        *q += alpha * (reward - *q);
        *q
    }
}

/// Free-function form of [`TabularQ::update`].
pub fn q_update(
    q: &mut TabularQ,
    key: &str,
    action: usize,
    reward: f64,
    next_key: &str,
    legal_next: &[usize],
    terminal: bool,
) -> Result<f64, AgentError> {
    q.update(key, action, reward, next_key, legal_next, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unseen_reads_zero() {
        let q = TabularQ::new(3, 0.1, 0.95);
        assert_eq!(q.get("nowhere", 2), 0.0);
        assert_eq!(q.values("nowhere"), vec![0.0; 3]);
    }

    #[test]
    fn terminal_reward_examples() {
        let mut q = TabularQ::new(2, 0.1, 0.95);
        assert!((q.update("s", 0, 1.0, "t", &[], true).unwrap() - 0.1).abs() < 1e-15);
        assert!((q.update("s", 0, 1.0, "t", &[], true).unwrap() - 0.19).abs() < 1e-15);
    }

    #[test]
    fn zero_reward_fixed_point() {
        let mut q = TabularQ::new(2, 0.1, 0.95);
        assert_eq!(q.update("s", 1, 0.0, "t", &[0, 1], false).unwrap(), 0.0);
    }

    #[test]
    fn bootstrap_only_over_legal_next() {
        let mut q = TabularQ::new(3, 0.5, 1.0);
        q.set("n", 0, 10.0);
        q.set("n", 2, 2.0);
        // action 0 masked out
        let v = q.update("s", 0, 0.0, "n", &[1, 2], false).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn empty_legal_set_on_non_terminal() {
        let mut q = TabularQ::new(2, 0.1, 0.95);
        assert!(matches!(
            q.update("s", 0, 1.0, "n", &[], false),
            Err(AgentError::EmptyLegalSet)
        ));
    }
}
