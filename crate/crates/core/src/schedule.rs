//! Per-episode exploration schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("epsilon values must lie in [0, 1], got initial={initial} minimum={minimum}")]
    OutOfRange { initial: f64, minimum: f64 },
    #[error("initial epsilon {initial} is below minimum {minimum}")]
    InitialBelowMinimum { initial: f64, minimum: f64 },
    #[error("exponential decay factor must lie in (0, 1], got {0}")]
    BadFactor(f64),
    #[error("linear decay horizon must be positive, got {0}")]
    BadHorizon(f64),
}

/// How epsilon shrinks across episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Decay {
    /// Reaches the minimum after `episodes` episodes.
    Linear { episodes: f64 },
    /// Multiplies by `factor` every episode.
    Exponential { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub minimum: f64,
    pub decay: Decay,
}

impl EpsilonSchedule {
    pub fn linear(initial: f64, minimum: f64, episodes: f64) -> Result<Self, ScheduleError> {
        Self {
            initial,
            minimum,
            decay: Decay::Linear { episodes },
        }
        .validated()
    }

    pub fn exponential(initial: f64, minimum: f64, factor: f64) -> Result<Self, ScheduleError> {
        Self {
            initial,
            minimum,
            decay: Decay::Exponential { factor },
        }
        .validated()
    }

    /// Constant epsilon; handy for tests and greedy evaluation.
    pub fn constant(epsilon: f64) -> Result<Self, ScheduleError> {
        Self::exponential(epsilon, epsilon, 1.0)
    }

    /// Checks parameter ranges. Deserialized schedules should pass through here.
    pub fn validated(self) -> Result<Self, ScheduleError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.initial) || !in_unit(self.minimum) {
            return Err(ScheduleError::OutOfRange {
                initial: self.initial,
                minimum: self.minimum,
            });
        }
        if self.initial < self.minimum {
            return Err(ScheduleError::InitialBelowMinimum {
                initial: self.initial,
                minimum: self.minimum,
            });
        }
        match self.decay {
            Decay::Exponential { factor } if !(factor > 0.0 && factor <= 1.0) => {
                Err(ScheduleError::BadFactor(factor))
            }
            Decay::Linear { episodes } if !(episodes > 0.0 && episodes.is_finite()) => {
                Err(ScheduleError::BadHorizon(episodes))
            }
            _ => Ok(self),
        }
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let value = match self.decay {
            Decay::Linear { episodes } => {
                let progress = episode as f64 / episodes;
                if progress >= 1.0 {
                    self.minimum
                } else {
                    self.initial - (self.initial - self.minimum) * progress
                }
            }
            Decay::Exponential { factor } => {
                (self.initial * factor.powf(episode as f64)).max(self.minimum)
            }
        };
        value.clamp(self.minimum, self.initial)
    }
}

/// Free-function form of [`EpsilonSchedule::epsilon_at`].
pub fn epsilon_at(schedule: &EpsilonSchedule, episode: usize) -> f64 {
    schedule.epsilon_at(episode)
}
