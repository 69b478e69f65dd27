//! Oracle accuracy against prompt completeness.

use std::path::Path;

use anyhow::Result;
use lagr_core::env::Extrapolate;
use lagr_core::oracle::descriptor::DescribedTask;
use lagr_core::oracle::{accuracy_sweep, HttpBackend, OracleBackend, ScriptedOracle, SweepRow, TaskDescriptor};
use lagr_core::orchestrator::{AnyEnv, EnvSpec, OracleSpec};
use lagr_core::rng::make_rng;
use serde::Deserialize;

use crate::ConfigError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub env: EnvSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_n() -> usize {
    100
}

/// Twenty evenly spaced fractions from 0 to 1.
pub fn default_fractions() -> Vec<f64> {
    (0..20).map(|i| i as f64 / 19.0).collect()
}

fn sweep<E: Extrapolate + DescribedTask + 'static>(env: &E, bench: &BenchFile) -> Result<Vec<SweepRow>> {
    let backend: Box<dyn OracleBackend> = match &bench.oracle {
        OracleSpec::Scripted(s) => Box::new(ScriptedOracle::new(env.clone(), *s, make_rng(bench.seed).fork("oracle"))?),
        OracleSpec::Http(h) => Box::new(HttpBackend::new(h.clone()).map_err(|e| ConfigError::new(e.to_string()))?),
    };
    let descriptor = TaskDescriptor::for_env(env);
    Ok(accuracy_sweep(backend.as_ref(), env, &descriptor, &bench.fractions, bench.n, bench.temperature)
        .map_err(|e| ConfigError::new(e.to_string()))?)
}

pub fn run(bench: &BenchFile) -> Result<Vec<SweepRow>> {
    match bench.env.build().map_err(|e| ConfigError::new(e.to_string()))? {
        AnyEnv::Cube(env) => sweep(&env, bench),
        AnyEnv::Grid(env) => sweep(&env, bench),
    }
}

pub fn write_csv(rows: &[SweepRow], out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fraction", "realized", "accuracy", "n", "failures"])?;
    for r in rows {
        w.serialize((r.requested, r.realized, r.accuracy, r.n, r.failures))?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    match out {
        Some(path) => crate::write_atomic(path, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}
