use super::config::SecondaryRewardMode;
use super::TrialError;

pub const LOGISTIC_SLOPE: f64 = 20.0;
pub const LOGISTIC_MIDPOINT: f64 = 0.9;

/// `1 / (1 + exp(-20 (fraction - 0.9)))`.
pub fn logistic(fraction: f64) -> f64 {
    1.0 / (1.0 + (-LOGISTIC_SLOPE * (fraction - LOGISTIC_MIDPOINT)).exp())
}

/// Logistic reward from a count of matching cells.
pub fn logistic_reward(matching: usize, cells: usize) -> f64 {
    logistic(matching as f64 / cells as f64)
}

/// Reward for the query gate after an oracle answer.
///
/// `match_fraction` is the proposal's matched-cell fraction; `None` for
/// environments without cells. Failed or unparseable answers pass
/// `accepted = false` and a fraction of zero.
pub fn secondary_reward(
    mode: SecondaryRewardMode,
    accepted: bool,
    match_fraction: Option<f64>,
) -> Result<f64, TrialError> {
    Ok(match mode {
        SecondaryRewardMode::BinaryPm => {
            if accepted {
                1.0
            } else {
                -1.0
            }
        }
        SecondaryRewardMode::Binary01 => {
            if accepted {
                1.0
            } else {
                0.0
            }
        }
        SecondaryRewardMode::Logistic => {
            let f = match_fraction.ok_or_else(|| {
                TrialError::Config("logistic secondary reward needs a grid environment".into())
            })?;
            logistic(f)
        }
    })
}
