use crate::rng::RngStream;

use super::AgentError;

/// Epsilon-greedy choice over `values`, one entry per legal action.
///
/// Returns the position in `values`. With probability `epsilon` the choice is
/// uniform; otherwise it is the argmax with ties broken uniformly at random.
pub fn select_action(values: &[f64], epsilon: f64, rng: &mut RngStream) -> Result<usize, AgentError> {
    if values.is_empty() {
        return Err(AgentError::EmptyLegalSet);
    }
    if rng.uniform() < epsilon {
        return Ok(rng.below(values.len()));
    }
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect();
    Ok(match ties.len() {
        1 => ties[0],
        // NaN values never equal best; fall back to a uniform pick
        0 => rng.below(values.len()),
        n => ties[rng.below(n)],
    })
}
