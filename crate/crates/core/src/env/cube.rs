//! Cube stacking.
//!
//! A state is the stack of cube ids from bottom to top. The agent places
//! any cube not yet on the stack or pops the top one. A configuration is
//! scored as `len(stack) * matched(stack)`, where `matched` counts positions
//! agreeing with the best-fitting target order.

use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, Extrapolate, ParseError, StepOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub id: usize,
    pub edge_cm: f64,
    pub color: String,
}

/// How oracle proposals are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceMode {
    /// Full-length exact match with a target order.
    #[default]
    Exact,
    /// `E(candidate) > delta`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeEnvConfig {
    pub cubes: Vec<CubeSpec>,
    pub target_orders: Vec<Vec<usize>>,
    pub bonus: f64,
    pub horizon: usize,
    pub delta: f64,
    pub acceptance: AcceptanceMode,
}

impl CubeEnvConfig {
    /// The eight cubes of the reference setup; the two 2cm cubes may go in either order.
    pub fn table() -> Self {
        let spec = |id, edge_cm, color: &str| CubeSpec {
            id,
            edge_cm,
            color: color.to_string(),
        };
        Self {
            cubes: vec![
                spec(1, 5.0, "Red"),
                spec(2, 4.0, "Red"),
                spec(3, 3.0, "Red"),
                spec(4, 2.0, "Red"),
                spec(5, 10.0, "Blue"),
                spec(6, 8.0, "Blue"),
                spec(7, 6.0, "Blue"),
                spec(8, 2.0, "Blue"),
            ],
            target_orders: vec![vec![5, 6, 7, 1, 2, 3, 4, 8], vec![5, 6, 7, 1, 2, 3, 8, 4]],
            bonus: 1.0,
            horizon: 100,
            delta: 1.0,
            acceptance: AcceptanceMode::Exact,
        }
    }

    /// A stack of `n` cubes. `n == 8` gives [`CubeEnvConfig::table`]; other sizes
    /// use `n / 2` red cubes followed by larger blue cubes with distinct edges, so
    /// the decreasing-size order (all blue, then all red) is unique.
    pub fn with_stack_size(n: usize) -> Result<Self, EnvError> {
        if n == 8 {
            return Ok(Self::table());
        }
        if !(2..=26).contains(&n) {
            return Err(EnvError::InvalidConfig(format!(
                "stack size must be between 2 and 26, got {n}"
            )));
        }
        let reds = n / 2;
        let blues = n - reds;
        let mut cubes = Vec::with_capacity(n);
        for i in 1..=reds {
            cubes.push(CubeSpec {
                id: i,
                edge_cm: (reds + 2 - i) as f64,
                color: "Red".into(),
            });
        }
        for j in 1..=blues {
            cubes.push(CubeSpec {
                id: reds + j,
                edge_cm: (reds + 1 + 2 * (blues - j + 1)) as f64,
                color: "Blue".into(),
            });
        }
        let target: Vec<usize> = (reds + 1..=n).chain(1..=reds).collect();
        let cfg = Self {
            cubes,
            target_orders: vec![target],
            ..Self::table()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let n = self.cubes.len();
        if n == 0 || n > 26 {
            return Err(EnvError::InvalidConfig(format!("need 1..=26 cubes, got {n}")));
        }
        let mut seen = vec![false; n + 1];
        for c in &self.cubes {
            if c.id == 0 || c.id > n || seen[c.id] {
                return Err(EnvError::InvalidConfig(format!(
                    "cube ids must be unique and within 1..={n}, found {}",
                    c.id
                )));
            }
            if !(c.edge_cm > 0.0) {
                return Err(EnvError::InvalidConfig(format!("cube {} has non-positive edge", c.id)));
            }
            seen[c.id] = true;
        }
        if self.target_orders.is_empty() {
            return Err(EnvError::InvalidConfig("no target orders".into()));
        }
        for t in &self.target_orders {
            let mut sorted = t.clone();
            sorted.sort_unstable();
            if sorted != (1..=n).collect::<Vec<_>>() {
                return Err(EnvError::InvalidConfig(format!(
                    "target order {t:?} is not a permutation of 1..={n}"
                )));
            }
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bottom-to-top list of cube ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CubeStack(pub Vec<usize>);

impl CubeStack {
    pub fn new(ids: impl Into<Vec<usize>>) -> Self {
        Self(ids.into())
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeAction {
    Place(usize),
    Pop,
}

#[derive(Debug, Clone)]
pub struct CubeEnv {
    config: CubeEnvConfig,
}

impl CubeEnv {
    pub fn new(config: CubeEnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &CubeEnvConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.cubes.len()
    }

    /// Action ids: `Place(id)` is `id - 1`, `Pop` is `n`.
    pub fn action_index(&self, action: CubeAction) -> usize {
        match action {
            CubeAction::Place(id) => id - 1,
            CubeAction::Pop => self.size(),
        }
    }

    pub fn action_from_index(&self, index: usize) -> Option<CubeAction> {
        let n = self.size();
        match index {
            i if i < n => Some(CubeAction::Place(i + 1)),
            i if i == n => Some(CubeAction::Pop),
            _ => None,
        }
    }

    pub fn is_legal(&self, stack: &CubeStack, action: CubeAction) -> bool {
        match action {
            CubeAction::Place(id) => id >= 1 && id <= self.size() && !stack.contains(id),
            CubeAction::Pop => !stack.is_empty(),
        }
    }

    /// Positions agreeing with the best-fitting target order.
    pub fn matched_positions(&self, stack: &CubeStack) -> usize {
        self.config
            .target_orders
            .iter()
            .map(|t| stack.0.iter().zip(t).filter(|(a, b)| a == b).count())
            .max()
            .unwrap_or(0)
    }

    pub fn is_target(&self, stack: &CubeStack) -> bool {
        self.config.target_orders.iter().any(|t| t == &stack.0)
    }

    pub fn apply(&self, stack: &CubeStack, action: CubeAction) -> Result<CubeStack, EnvError> {
        if !self.is_legal(stack, action) {
            return Err(EnvError::IllegalAction {
                action: format!("{action:?}"),
                state: self.render_pattern(stack),
            });
        }
        let mut next = stack.clone();
        match action {
            CubeAction::Place(id) => next.0.push(id),
            CubeAction::Pop => {
                next.0.pop();
            }
        }
        Ok(next)
    }

    /// Longest prefix shared with any target, and the first target attaining it.
    fn best_prefix(&self, stack: &CubeStack) -> (usize, &[usize]) {
        let mut best = (0, self.config.target_orders[0].as_slice());
        for t in &self.config.target_orders {
            let len = stack.0.iter().zip(t).take_while(|(a, b)| a == b).count();
            if len > best.0 {
                best = (len, t.as_slice());
            }
        }
        best
    }

    pub fn letter(id: usize) -> char {
        (b'a' + (id - 1) as u8) as char
    }

    fn parse_list(&self, inner: &str) -> Result<CubeStack, ParseError> {
        let n = self.size();
        let mut ids = Vec::new();
        if inner.trim().is_empty() {
            return Ok(CubeStack::default());
        }
        for raw in inner.split(',') {
            let token = raw.trim().trim_matches(|c| c == '\'' || c == '"').trim();
            let mut chars = token.chars();
            let id = match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => {
                    let id = (c.to_ascii_lowercase() as u8 - b'a') as usize + 1;
                    (id <= n).then_some(id)
                }
                _ => None,
            }
            .ok_or_else(|| ParseError::UnknownLabel(token.to_string()))?;
            if ids.contains(&id) {
                return Err(ParseError::DuplicateLabel(token.to_string()));
            }
            ids.push(id);
        }
        Ok(CubeStack(ids))
    }
}

pub fn cube_eval(env: &CubeEnv, stack: &CubeStack) -> f64 {
    (stack.len() * env.matched_positions(stack)) as f64
}

impl Environment for CubeEnv {
    type State = CubeStack;
    type Pattern = CubeStack;

    fn id(&self) -> String {
        format!("cube-{}", self.size())
    }

    fn num_actions(&self) -> usize {
        self.size() + 1
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&self) -> CubeStack {
        CubeStack::default()
    }

    fn legal_actions(&self, state: &CubeStack) -> Vec<usize> {
        let n = self.size();
        let mut legal: Vec<usize> = (1..=n).filter(|id| !state.contains(*id)).map(|id| id - 1).collect();
        if !state.is_empty() {
            legal.push(n);
        }
        legal
    }

    fn step(&self, state: &CubeStack, action: usize) -> Result<StepOutcome<CubeStack>, EnvError> {
        let action = self.action_from_index(action).ok_or_else(|| EnvError::IllegalAction {
            action: format!("#{action}"),
            state: self.render_pattern(state),
        })?;
        let next = self.apply(state, action)?;
        let completed = next.len() == self.size() && self.is_target(&next);
        let bonus = if completed { self.config.bonus } else { 0.0 };
        let reward = cube_eval(self, &next) - cube_eval(self, state) + bonus;
        Ok(StepOutcome {
            next,
            reward,
            bonus,
            terminal: completed,
            rejected_delta: 0.0,
        })
    }

    fn evaluate(&self, state: &CubeStack) -> f64 {
        cube_eval(self, state)
    }

    fn pattern_of(&self, state: &CubeStack) -> CubeStack {
        state.clone()
    }

    fn evaluate_pattern(&self, pattern: &CubeStack) -> f64 {
        cube_eval(self, pattern)
    }

    fn is_solution(&self, candidate: &CubeStack) -> bool {
        match self.config.acceptance {
            AcceptanceMode::Exact => candidate.len() == self.size() && self.is_target(candidate),
            AcceptanceMode::Literal => cube_eval(self, candidate) > self.config.delta,
        }
    }

    fn render_pattern(&self, pattern: &CubeStack) -> String {
        let items: Vec<String> = pattern.0.iter().map(|&id| format!("'{}'", Self::letter(id))).collect();
        format!("[{}]", items.join(","))
    }

    fn parse_pattern(&self, text: &str) -> Result<CubeStack, ParseError> {
        let mut first_err = None;
        let mut rest = text;
        while let Some(open) = rest.find('[') {
            let after = &rest[open + 1..];
            let Some(close) = after.find(']') else { break };
            match self.parse_list(&after[..close]) {
                Ok(stack) => return Ok(stack),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
            rest = &after[close + 1..];
        }
        Err(first_err.unwrap_or(ParseError::NotFound))
    }

    fn check_candidate(&self, pattern: &CubeStack) -> Result<(), ParseError> {
        if pattern.len() != self.size() {
            return Err(ParseError::WrongLength {
                expected: self.size(),
                got: pattern.len(),
            });
        }
        Ok(())
    }

    fn policy_action(&self, solution: &CubeStack, state: &CubeStack) -> Option<usize> {
        if solution == state {
            return None;
        }
        let action = if solution.0.starts_with(&state.0) {
            CubeAction::Place(solution.0[state.len()])
        } else {
            CubeAction::Pop
        };
        Some(self.action_index(action))
    }

    fn state_key(&self, state: &CubeStack) -> String {
        self.render_pattern(state)
    }

    fn features(&self, state: &CubeStack) -> Vec<f64> {
        // one-hot cube id per stack position
        let n = self.size();
        let mut v = vec![0.0; n * n];
        for (pos, &id) in state.0.iter().enumerate() {
            v[pos * n + id - 1] = 1.0;
        }
        v
    }

    fn gate_features(&self, state: &CubeStack) -> Vec<f64> {
        self.features(state)
    }

    fn match_fraction(&self, _pattern: &CubeStack) -> Option<f64> {
        None
    }

    fn cell_count(&self) -> Option<usize> {
        None
    }
}

impl Extrapolate for CubeEnv {
    fn completion_fraction(&self, pattern: &CubeStack) -> f64 {
        pattern.len() as f64 / self.size() as f64
    }

    fn correct_completion(&self, pattern: &CubeStack) -> CubeStack {
        CubeStack(self.best_prefix(pattern).1.to_vec())
    }

    fn corrupted_completion(&self, pattern: &CubeStack) -> CubeStack {
        let (_, target) = self.best_prefix(pattern);
        let mut out = pattern.0.clone();
        out.extend(target.iter().rev().filter(|id| !pattern.contains(**id)));
        // the reversed tail can land on the other target order (or be forced
        // when one cube is missing); swap the two bottom cubes instead
        if self.is_target(&CubeStack(out.clone())) && out.len() >= 2 {
            out.swap(0, 1);
        }
        CubeStack(out)
    }

    fn partial_target(&self, fraction: f64) -> CubeStack {
        let n = self.size();
        let len = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
        CubeStack(self.config.target_orders[0][..len].to_vec())
    }
}
