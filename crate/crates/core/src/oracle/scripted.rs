//! Deterministic stand-in for a language model.
//!
//! Answers correctly once the state shows at least `theta` of the target,
//! unless an error coin with probability `temperature * kappa_slope` fires.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::env::Extrapolate;
use crate::rng::RngStream;

use super::{OracleBackend, OracleError, OracleQuery};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedConfig {
    pub theta: f64,
    /// Error probability added per unit of temperature.
    pub kappa_slope: f64,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        Self {
            theta: 0.45,
            kappa_slope: 0.0,
        }
    }
}

impl ScriptedConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(OracleError::Invalid(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(self.kappa_slope >= 0.0) {
            return Err(OracleError::Invalid(format!("kappa_slope {} is negative", self.kappa_slope)));
        }
        Ok(())
    }

    pub fn error_probability(&self, temperature: f64) -> f64 {
        (temperature * self.kappa_slope).clamp(0.0, 1.0)
    }
}

#[derive(Debug)]
pub struct ScriptedOracle<E> {
    env: E,
    config: ScriptedConfig,
    rng: Mutex<RngStream>,
}

impl<E: Extrapolate> ScriptedOracle<E> {
    pub fn new(env: E, config: ScriptedConfig, rng: RngStream) -> Result<Self, OracleError> {
        config.validate()?;
        Ok(Self {
            env,
            config,
            rng: Mutex::new(rng),
        })
    }

    pub fn config(&self) -> &ScriptedConfig {
        &self.config
    }

    /// The proposal for `pattern`, before rendering.
    pub fn answer(&self, pattern: &E::Pattern, temperature: f64) -> E::Pattern {
        let p_err = self.config.error_probability(temperature);
        // no draw at all when errors are impossible, so tau = 0 stays a pure function
        let wrong = p_err > 0.0 && self.rng.lock().expect("oracle rng poisoned").coin(p_err);
        if self.env.completion_fraction(pattern) >= self.config.theta && !wrong {
            self.env.correct_completion(pattern)
        } else {
            self.env.corrupted_completion(pattern)
        }
    }
}

impl<E: Extrapolate> OracleBackend for ScriptedOracle<E> {
    fn backend_id(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, query: &OracleQuery) -> Result<String, OracleError> {
        let pattern = self
            .env
            .parse_pattern(&query.rendered_state)
            .map_err(|e| OracleError::BadState(e.to_string()))?;
        Ok(self.env.render_pattern(&self.answer(&pattern, query.temperature)))
    }
}
