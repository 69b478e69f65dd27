//! Extrapolation oracle: prompts, backends, and parsing of proposed solutions.

pub mod descriptor;
pub mod http;
pub mod scripted;
pub mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, ParseError};

pub use descriptor::{render_prompt, TaskDescriptor, STATE_MARKER};
pub use http::{HttpBackend, HttpConfig};
pub use scripted::{ScriptedConfig, ScriptedOracle};
pub use sweep::{accuracy_sweep, SweepRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("template {0:?} must contain the state marker exactly once")]
    Marker(String),
    #[error("temperature {0} outside [0, 1]")]
    Temperature(f64),
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint answered with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("query state could not be read back: {0}")]
    BadState(String),
    #[error("no cached response for this query")]
    NotCached,
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// One request to an oracle backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleQuery {
    pub env_id: String,
    pub descriptor_id: String,
    pub prompt: String,
    pub rendered_state: String,
    pub temperature: f64,
}

impl OracleQuery {
    pub fn new<E: Environment>(
        env: &E,
        descriptor: &TaskDescriptor,
        pattern: &E::Pattern,
        temperature: f64,
    ) -> Result<Self, OracleError> {
        if !(0.0..=1.0).contains(&temperature) {
            return Err(OracleError::Temperature(temperature));
        }
        let rendered_state = env.render_pattern(pattern);
        Ok(Self {
            env_id: env.id(),
            descriptor_id: descriptor.id.clone(),
            prompt: descriptor.fill(&rendered_state),
            rendered_state,
            temperature,
        })
    }
}

/// Something that turns a prompt into completion text.
pub trait OracleBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn complete(&self, query: &OracleQuery) -> Result<String, OracleError>;
}

impl<B: OracleBackend + ?Sized> OracleBackend for Box<B> {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }

    fn complete(&self, query: &OracleQuery) -> Result<String, OracleError> {
        (**self).complete(query)
    }
}

impl<B: OracleBackend + ?Sized> OracleBackend for std::sync::Arc<B> {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }

    fn complete(&self, query: &OracleQuery) -> Result<String, OracleError> {
        (**self).complete(query)
    }
}

/// Backend that never answers; paired with a pre-filled cache it replays recorded runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayOnly;

impl OracleBackend for ReplayOnly {
    fn backend_id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, _query: &OracleQuery) -> Result<String, OracleError> {
        Err(OracleError::NotCached)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Malformed,
    ConstraintViolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResponse<P> {
    pub raw_text: String,
    /// Present exactly when `status` is [`ParseStatus::Ok`].
    pub parsed: Option<P>,
    pub status: ParseStatus,
    pub backend_id: String,
    pub served_from_cache: bool,
}

impl<P> OracleResponse<P> {
    pub fn from_text<E: Environment<Pattern = P>>(
        env: &E,
        raw_text: String,
        backend_id: String,
        served_from_cache: bool,
    ) -> Self {
        let (parsed, status) = match parse_solution(env, &raw_text) {
            Ok(p) => (Some(p), ParseStatus::Ok),
            Err(e) if e.is_constraint_violation() => (None, ParseStatus::ConstraintViolation),
            Err(_) => (None, ParseStatus::Malformed),
        };
        Self {
            raw_text,
            parsed,
            status,
            backend_id,
            served_from_cache,
        }
    }
}

/// Extracts a full candidate solution from completion text.
pub fn parse_solution<E: Environment>(env: &E, text: &str) -> Result<E::Pattern, ParseError> {
    let pattern = env.parse_pattern(text)?;
    env.check_candidate(&pattern)?;
    Ok(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::shapes::target_shape;
    use crate::env::{CubeEnv, CubeEnvConfig, CubeStack, GridEnv, GridEnvConfig};

    #[test]
    fn parse_examples() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        assert_eq!(
            parse_solution(&env, "['e','f','g','a','b','c','d','h']").unwrap(),
            CubeStack::new(vec![5, 6, 7, 1, 2, 3, 4, 8])
        );
        let dup = parse_solution(&env, "['e','e','f','a','b','c','d','h']").unwrap_err();
        assert!(dup.is_constraint_violation());
        let short = parse_solution(&env, "['e','f']").unwrap_err();
        assert!(matches!(short, ParseError::WrongLength { expected: 8, got: 2 }));
        assert_eq!(parse_solution(&env, "no idea").unwrap_err(), ParseError::NotFound);

        let grid = GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).unwrap())).unwrap();
        let text = format!(
            "The shape is an oval, so the final image is:\n{}\nHope this helps.",
            crate::env::grid::render_grid(grid.target())
        );
        assert_eq!(&parse_solution(&grid, &text).unwrap(), grid.target());
    }

    #[test]
    fn response_status_tracks_parse() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let ok = OracleResponse::from_text(&env, "['e','f','g','a','b','c','d','h']".into(), "t".into(), false);
        assert_eq!(ok.status, ParseStatus::Ok);
        assert!(ok.parsed.is_some());
        let bad = OracleResponse::from_text(&env, "['z']".into(), "t".into(), true);
        assert_eq!(bad.status, ParseStatus::ConstraintViolation);
        assert!(bad.parsed.is_none() && bad.served_from_cache);
        let junk = OracleResponse::from_text(&env, "sorry".into(), "t".into(), false);
        assert_eq!(junk.status, ParseStatus::Malformed);
    }

    #[test]
    fn query_rejects_bad_temperature() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let d = TaskDescriptor::for_env(&env);
        assert!(matches!(
            OracleQuery::new(&env, &d, &CubeStack::default(), 1.5),
            Err(OracleError::Temperature(_))
        ));
    }
}
