//! Multi-seed runs and their aggregation.

use std::sync::Arc;

use serde::Serialize;

use crate::cache::OracleCache;
use crate::env::Extrapolate;
use crate::oracle::descriptor::DescribedTask;
use crate::oracle::{HttpBackend, OracleBackend, ScriptedOracle};
use crate::rng::make_rng;

use super::config::{AnyEnv, Gating, OracleSpec, RunConfig};
use super::trial::{run_baseline, run_trial, TrialMetrics};
use super::TrialError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    /// Per-episode return statistics across seeds.
    pub returns: Vec<MeanStderr>,
    pub queries: MeanStderr,
    pub backend_calls: MeanStderr,
    pub cache_hits: MeanStderr,
}

impl Aggregate {
    pub fn total_mean_return(&self) -> f64 {
        self.returns.iter().map(|r| r.mean).sum()
    }
}

pub fn aggregate(trials: &[TrialMetrics]) -> Result<Aggregate, TrialError> {
    let first = trials
        .first()
        .ok_or_else(|| TrialError::Config("aggregation needs at least one trial".into()))?;
    let episodes = first.returns.len();
    if trials.iter().any(|t| t.returns.len() != episodes) {
        return Err(TrialError::Config("trials have different episode counts".into()));
    }
    let column = |f: &dyn Fn(&TrialMetrics) -> f64| mean_stderr(&trials.iter().map(f).collect::<Vec<_>>());
    Ok(Aggregate {
        seeds: trials.iter().map(|t| t.seed).collect(),
        returns: (0..episodes).map(|e| column(&|t| t.returns[e])).collect(),
        queries: column(&|t| t.total_queries() as f64),
        backend_calls: column(&|t| t.backend_calls as f64),
        cache_hits: column(&|t| t.cache_hits as f64),
    })
}

/// Total mean return of `lagr` over that of `baseline`.
pub fn performance_ratio(lagr: &Aggregate, baseline: &Aggregate) -> Result<f64, TrialError> {
    if lagr.returns.len() != baseline.returns.len() {
        return Err(TrialError::Config(format!(
            "episode counts differ: {} vs {}",
            lagr.returns.len(),
            baseline.returns.len()
        )));
    }
    let denom = baseline.total_mean_return();
    if !(denom > 0.0) {
        return Err(TrialError::Ratio(denom));
    }
    Ok(lagr.total_mean_return() / denom)
}

/// How a set of trials is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Oracle with the configured gating.
    Lagr(Gating),
    /// The standalone learner without any oracle machinery.
    Baseline,
}

impl Variant {
    pub fn label(self) -> String {
        match self {
            Variant::Lagr(g) => format!("lagr-{}", g.label()),
            Variant::Baseline => "baseline".into(),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            other => other
                .strip_prefix("lagr-")
                .ok_or_else(|| format!("unknown variant {other:?}"))?
                .parse()
                .map(Variant::Lagr),
        }
    }
}

/// Backend for one trial: scripted oracles get their own seeded stream,
/// a live backend is shared.
pub fn trial_backend<E: Extrapolate + 'static>(
    env: &E,
    cfg: &RunConfig,
    seed: u64,
    shared: Option<&Arc<dyn OracleBackend>>,
) -> Result<Arc<dyn OracleBackend>, TrialError> {
    if let Some(b) = shared {
        return Ok(b.clone());
    }
    match &cfg.oracle {
        OracleSpec::Scripted(s) => Ok(Arc::new(ScriptedOracle::new(
            env.clone(),
            *s,
            make_rng(seed).fork("oracle"),
        )?)),
        OracleSpec::Http(h) => Ok(Arc::new(HttpBackend::new(h.clone())?)),
    }
}

fn run_typed<E: Extrapolate + DescribedTask + 'static>(
    env: &E,
    cfg: &RunConfig,
    variant: Variant,
    seeds: &[u64],
    cache: &OracleCache,
) -> Result<Vec<TrialMetrics>, TrialError> {
    let shared: Option<Arc<dyn OracleBackend>> = match (&cfg.oracle, variant) {
        (OracleSpec::Http(h), Variant::Lagr(g)) if g != Gating::Never => Some(Arc::new(HttpBackend::new(h.clone())?)),
        _ => None,
    };
    seeds
        .iter()
        .map(|&seed| match variant {
            Variant::Baseline => run_baseline(env, cfg, seed),
            Variant::Lagr(g) => {
                let mut c = cfg.clone();
                c.gating = g;
                let backend = trial_backend(env, &c, seed, shared.as_ref())?;
                run_trial(env, &c, backend.as_ref(), cache, seed)
            }
        })
        .collect()
}

/// Runs `variant` for every seed, one after another, sharing `cache`.
pub fn run_trials(
    cfg: &RunConfig,
    variant: Variant,
    seeds: &[u64],
    cache: &OracleCache,
) -> Result<Vec<TrialMetrics>, TrialError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(TrialError::Config("need at least one seed".into()));
    }
    match cfg.env.build()? {
        AnyEnv::Cube(env) => run_typed(&env, cfg, variant, seeds, cache),
        AnyEnv::Grid(env) => run_typed(&env, cfg, variant, seeds, cache),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub variant: String,
    pub aggregate: Aggregate,
    pub trials: Vec<TrialMetrics>,
}

pub fn run_experiment(
    cfg: &RunConfig,
    variant: Variant,
    seeds: &[u64],
    cache: &OracleCache,
) -> Result<ExperimentResult, TrialError> {
    let trials = run_trials(cfg, variant, seeds, cache)?;
    Ok(ExperimentResult {
        variant: variant.label(),
        aggregate: aggregate(&trials)?,
        trials,
    })
}
