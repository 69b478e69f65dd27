use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{BanditConfig, DqnConfig};
use crate::env::cube::AcceptanceMode;
use crate::env::shapes::{load_fixture, target_shape};
use crate::env::{CubeEnv, CubeEnvConfig, GridEnv, GridEnvConfig};
use crate::oracle::{HttpConfig, ScriptedConfig};
use crate::schedule::EpsilonSchedule;

use super::TrialError;

/// Which environment to build, with optional overrides of its table defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Cube {
        #[serde(default = "default_stack")]
        stack_size: usize,
        #[serde(default)]
        acceptance: AcceptanceMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bonus: Option<f64>,
    },
    Image {
        /// Built-in shape name or path to a fixture file.
        #[serde(default = "default_image_target")]
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bonus: Option<f64>,
    },
    Arrangement {
        #[serde(default = "default_arrangement_target")]
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bonus: Option<f64>,
    },
}

fn default_stack() -> usize {
    8
}

fn default_image_target() -> String {
    "oval10".into()
}

fn default_arrangement_target() -> String {
    "diamond5".into()
}

/// A built environment of either family.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Cube(CubeEnv),
    Grid(GridEnv),
}

impl EnvSpec {
    pub fn cube(stack_size: usize) -> Self {
        EnvSpec::Cube {
            stack_size,
            acceptance: AcceptanceMode::Exact,
            horizon: None,
            delta: None,
            bonus: None,
        }
    }

    pub fn image(target: &str) -> Self {
        EnvSpec::Image {
            target: target.into(),
            horizon: None,
            delta: None,
            bonus: None,
        }
    }

    pub fn arrangement(target: &str) -> Self {
        EnvSpec::Arrangement {
            target: target.into(),
            horizon: None,
            delta: None,
            bonus: None,
        }
    }

    pub fn is_cube(&self) -> bool {
        matches!(self, EnvSpec::Cube { .. })
    }

    pub fn build(&self) -> Result<AnyEnv, TrialError> {
        fn shape(name: &str, w: usize, h: usize) -> Result<crate::env::shapes::GridTarget, TrialError> {
            let looks_like_path = name.contains('/') || name.ends_with(".txt");
            let t = if looks_like_path {
                load_fixture(Path::new(name))?
            } else {
                target_shape(name, w, h)?
            };
            Ok(t)
        }
        Ok(match self {
            EnvSpec::Cube {
                stack_size,
                acceptance,
                horizon,
                delta,
                bonus,
            } => {
                let mut c = CubeEnvConfig::with_stack_size(*stack_size)?;
                c.acceptance = *acceptance;
                c.horizon = horizon.unwrap_or(c.horizon);
                c.delta = delta.unwrap_or(c.delta);
                c.bonus = bonus.unwrap_or(c.bonus);
                AnyEnv::Cube(CubeEnv::new(c)?)
            }
            EnvSpec::Image {
                target,
                horizon,
                delta,
                bonus,
            } => {
                let mut c = GridEnvConfig::image(shape(target, 10, 10)?);
                c.horizon = horizon.unwrap_or(c.horizon);
                c.delta = delta.unwrap_or(c.delta);
                c.bonus = bonus.unwrap_or(c.bonus);
                AnyEnv::Grid(GridEnv::new(c)?)
            }
            EnvSpec::Arrangement {
                target,
                horizon,
                delta,
                bonus,
            } => {
                let mut c = GridEnvConfig::arrangement(shape(target, 5, 5)?);
                c.horizon = horizon.unwrap_or(c.horizon);
                c.delta = delta.unwrap_or(c.delta);
                c.bonus = bonus.unwrap_or(c.bonus);
                AnyEnv::Grid(GridEnv::new(c)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimaryConfig {
    Tabular { alpha: f64, gamma: f64 },
    Dqn(DqnConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondaryKind {
    Tabular,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondaryRewardMode {
    /// +1 accepted, -1 otherwise.
    BinaryPm,
    /// 1 accepted, 0 otherwise.
    Binary01,
    /// Smooth score of the proposal's matched-cell fraction.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gating {
    /// The bandit decides.
    #[default]
    Seq,
    /// Query on every gate-open step.
    Always,
    /// Never query: plain reinforcement learning.
    Never,
}

impl std::str::FromStr for Gating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" => Ok(Gating::Seq),
            "always" => Ok(Gating::Always),
            "never" => Ok(Gating::Never),
            other => Err(format!("unknown gating {other:?} (expected seq, always or never)")),
        }
    }
}

impl Gating {
    pub fn label(self) -> &'static str {
        match self {
            Gating::Seq => "seq",
            Gating::Always => "always",
            Gating::Never => "never",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Scripted(ScriptedConfig),
    Http(HttpConfig),
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Scripted(ScriptedConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub episodes: usize,
    pub primary: PrimaryConfig,
    pub primary_epsilon: EpsilonSchedule,
    pub secondary: BanditConfig,
    pub secondary_kind: SecondaryKind,
    pub secondary_epsilon: EpsilonSchedule,
    pub secondary_reward: SecondaryRewardMode,
    pub oracle: OracleSpec,
    pub temperature: f64,
    /// Probability of following the accepted solution once one exists.
    pub follow_probability: f64,
    pub gating: Gating,
    pub cache_pool: usize,
}

fn linear_to_min(min: f64, episodes: usize) -> EpsilonSchedule {
    // reach the minimum after 80% of the budget
    EpsilonSchedule::linear(1.0, min, (0.8 * episodes as f64).max(1.0)).expect("valid schedule")
}

impl RunConfig {
    /// Tabular Q-learning on `stack_size` cubes.
    pub fn cube(stack_size: usize, episodes: usize) -> Self {
        let eps = linear_to_min(0.05, episodes);
        Self {
            env: EnvSpec::cube(stack_size),
            episodes,
            primary: PrimaryConfig::Tabular { alpha: 0.1, gamma: 0.95 },
            primary_epsilon: eps.clone(),
            secondary: BanditConfig {
                alpha: 0.1,
                ..BanditConfig::default()
            },
            secondary_kind: SecondaryKind::Tabular,
            secondary_epsilon: eps,
            secondary_reward: SecondaryRewardMode::BinaryPm,
            oracle: OracleSpec::default(),
            temperature: 0.0,
            follow_probability: 1.0,
            gating: Gating::Seq,
            cache_pool: crate::cache::DEFAULT_POOL,
        }
    }

    /// DQN on the 10x10 image task.
    pub fn image(target: &str, episodes: usize) -> Self {
        let eps = EpsilonSchedule::exponential(1.0, 0.1, 0.998).expect("valid schedule");
        Self {
            env: EnvSpec::image(target),
            episodes,
            primary: PrimaryConfig::Dqn(DqnConfig::image()),
            primary_epsilon: eps.clone(),
            secondary: BanditConfig {
                hidden: vec![128, 128],
                ..BanditConfig::default()
            },
            secondary_kind: SecondaryKind::Network,
            secondary_epsilon: eps,
            secondary_reward: SecondaryRewardMode::Binary01,
            oracle: OracleSpec::default(),
            temperature: 0.0,
            follow_probability: 1.0,
            gating: Gating::Seq,
            cache_pool: crate::cache::DEFAULT_POOL,
        }
    }

    /// DQN on the 5x5 arrangement task.
    pub fn arrangement(target: &str, episodes: usize) -> Self {
        Self {
            env: EnvSpec::arrangement(target),
            primary: PrimaryConfig::Dqn(DqnConfig::arrangement()),
            secondary: BanditConfig::default(),
            ..Self::image(target, episodes)
        }
    }

    /// Defaults for the environment family of `env`.
    pub fn for_env(env: EnvSpec, episodes: usize) -> Self {
        let mut cfg = match &env {
            EnvSpec::Cube { stack_size, .. } => Self::cube(*stack_size, episodes),
            EnvSpec::Image { target, .. } => Self::image(target, episodes),
            EnvSpec::Arrangement { target, .. } => Self::arrangement(target, episodes),
        };
        cfg.env = env;
        cfg
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        let bad = |m: String| Err(TrialError::Config(m));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.follow_probability) {
            return bad(format!("follow_probability {} outside [0, 1]", self.follow_probability));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 1]", self.temperature));
        }
        if self.cache_pool == 0 {
            return bad("cache_pool must be at least 1".into());
        }
        if self.env.is_cube() && self.secondary_reward == SecondaryRewardMode::Logistic {
            return bad("logistic secondary reward needs a grid environment".into());
        }
        if self.env.is_cube() && matches!(self.primary, PrimaryConfig::Dqn(_)) {
            return bad("cube stacking uses a tabular primary agent".into());
        }
        if self.env.is_cube() && self.secondary_kind == SecondaryKind::Network {
            return bad("cube stacking uses a tabular query gate".into());
        }
        if let PrimaryConfig::Dqn(d) = &self.primary {
            d.validate()?;
        }
        self.primary_epsilon.clone().validated()?;
        self.secondary_epsilon.clone().validated()?;
        if let OracleSpec::Scripted(s) = &self.oracle {
            s.validate()?;
        }
        Ok(())
    }
}
