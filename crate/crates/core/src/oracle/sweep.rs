//! Accuracy of an oracle as a function of how much of the target it is shown.

use serde::Serialize;

use crate::env::Extrapolate;

use super::{parse_solution, OracleBackend, OracleError, OracleQuery, TaskDescriptor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Fraction asked for.
    pub requested: f64,
    /// Fraction the partial state actually shows after rounding to whole cubes or cells.
    pub realized: f64,
    pub accuracy: f64,
    pub n: usize,
    /// Queries that errored or could not be parsed.
    pub failures: usize,
}

/// Queries `backend` `n_queries` times per fraction and scores acceptance.
pub fn accuracy_sweep<E: Extrapolate, B: OracleBackend + ?Sized>(
    backend: &B,
    env: &E,
    descriptor: &TaskDescriptor,
    fractions: &[f64],
    n_queries: usize,
    temperature: f64,
) -> Result<Vec<SweepRow>, OracleError> {
    if n_queries == 0 {
        return Err(OracleError::Invalid("accuracy needs at least one query per fraction".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(OracleError::Invalid(format!("fraction {f} outside [0, 1]")));
    }
    fractions
        .iter()
        .map(|&requested| {
            let partial = env.partial_target(requested);
            let query = OracleQuery::new(env, descriptor, &partial, temperature)?;
            let mut correct = 0;
            let mut failures = 0;
            for _ in 0..n_queries {
                match backend.complete(&query) {
                    Ok(text) => match parse_solution(env, &text) {
                        Ok(p) if env.is_solution(&p) => correct += 1,
                        Ok(_) => {}
                        Err(_) => failures += 1,
                    },
                    Err(e) => {
                        log::warn!("sweep query failed: {e}");
                        failures += 1;
                    }
                }
            }
            Ok(SweepRow {
                requested,
                realized: env.completion_fraction(&partial),
                accuracy: correct as f64 / n_queries as f64,
                n: n_queries,
                failures,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CubeEnv, CubeEnvConfig};
    use crate::oracle::{ReplayOnly, ScriptedConfig, ScriptedOracle};
    use crate::rng::make_rng;

    #[test]
    fn scripted_step_examples() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let o = ScriptedOracle::new(env.clone(), ScriptedConfig::default(), make_rng(0)).unwrap();
        let d = TaskDescriptor::for_env(&env);
        let rows = accuracy_sweep(&o, &env, &d, &[0.125, 0.5, 1.0], 10, 0.0).unwrap();
        let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
        assert_eq!(acc, vec![0.0, 1.0, 1.0]);
        assert_eq!(rows[0].realized, 0.125);
    }

    #[test]
    fn zero_queries_rejected() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let d = TaskDescriptor::for_env(&env);
        assert!(accuracy_sweep(&ReplayOnly, &env, &d, &[0.5], 0, 0.0).is_err());
    }

    #[test]
    fn backend_errors_count_as_failures() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let d = TaskDescriptor::for_env(&env);
        let rows = accuracy_sweep(&ReplayOnly, &env, &d, &[0.5], 4, 0.0).unwrap();
        assert_eq!((rows[0].accuracy, rows[0].failures), (0.0, 4));
    }
}
