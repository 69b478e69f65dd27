//! Experiment files and the shipped presets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lagr_core::agents::BanditConfig;
use lagr_core::orchestrator::{
    EnvSpec, Gating, OracleSpec, PrimaryConfig, RunConfig, SecondaryKind, SecondaryRewardMode, Variant,
};
use lagr_core::schedule::EpsilonSchedule;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub const PRESETS: &[(&str, &str)] = &[
    ("cube-8", include_str!("../presets/cube-8.toml")),
    ("cube-sizes-5-8-11", include_str!("../presets/cube-sizes-5-8-11.toml")),
    ("image-10", include_str!("../presets/image-10.toml")),
    ("arrange-5", include_str!("../presets/arrange-5.toml")),
    ("oracle-bench", include_str!("../presets/oracle-bench.toml")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            ConfigError::new(format!("unknown preset {name:?}; available: {}", names.join(", "))).into()
        })
}

/// Run settings. Anything left out takes the defaults for the environment family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub env: EnvSpec,
    pub episodes: usize,
    pub primary: Option<PrimaryConfig>,
    pub primary_epsilon: Option<EpsilonSchedule>,
    pub secondary: Option<BanditConfig>,
    pub secondary_kind: Option<SecondaryKind>,
    pub secondary_epsilon: Option<EpsilonSchedule>,
    pub secondary_reward: Option<SecondaryRewardMode>,
    pub oracle: Option<OracleSpec>,
    pub temperature: Option<f64>,
    pub follow_probability: Option<f64>,
    pub cache_pool: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    pub seeds: Vec<u64>,
    pub variants: Vec<String>,
    /// Run the whole experiment once per cube stack size.
    pub stack_sizes: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub run: RunSection,
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub backend: Option<String>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gating: Option<Gating>,
    pub temperature: Option<f64>,
}

/// One labelled run configuration inside an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Arm {
    pub label: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(serialize_with = "variant_labels")]
    pub variants: Vec<Variant>,
    pub arms: Vec<Arm>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub cache: Option<PathBuf>,
}

fn variant_labels<S: serde::Serializer>(v: &[Variant], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.label()))
}

/// Parses TOML, turning serde's complaints (unknown keys included) into config errors.
pub fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| ConfigError::new(format!("{origin}: {}", e.message().trim())).into())
}

pub fn read_source(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| ConfigError::new(format!("{e:#}")).into())
}

pub fn oracle_for_backend(current: &OracleSpec, backend: &str) -> Result<OracleSpec> {
    Ok(match (backend, current) {
        ("scripted", OracleSpec::Scripted(_)) | ("http", OracleSpec::Http(_)) => current.clone(),
        ("scripted", _) => OracleSpec::Scripted(Default::default()),
        ("http", _) => OracleSpec::Http(Default::default()),
        (other, _) => bail!(ConfigError::new(format!("unknown backend {other:?} (expected scripted or http)"))),
    })
}

fn base_config(run: &RunSection, env: EnvSpec) -> RunConfig {
    let mut cfg = RunConfig::for_env(env, run.episodes);
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = &run.$field { cfg.$field = v.clone(); })*
        };
    }
    take!(
        primary,
        primary_epsilon,
        secondary,
        secondary_kind,
        secondary_epsilon,
        secondary_reward,
        oracle,
        temperature,
        follow_probability,
        cache_pool
    );
    cfg
}

impl ExperimentFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        parse_toml(text, origin)
    }

    pub fn resolve(self, ov: &Overrides) -> Result<Experiment> {
        let cfg_err = |m: String| -> anyhow::Error { ConfigError::new(m).into() };
        let seeds = ov.seeds.clone().unwrap_or(self.seeds);
        if seeds.is_empty() {
            return Err(cfg_err("at least one seed is required".into()));
        }
        let mut variants = Vec::new();
        for v in &self.variants {
            let mut parsed: Variant = v.parse().map_err(cfg_err)?;
            if let (Some(g), Variant::Lagr(_)) = (ov.gating, parsed) {
                parsed = Variant::Lagr(g);
            }
            if !variants.contains(&parsed) {
                variants.push(parsed);
            }
        }
        if variants.is_empty() {
            return Err(cfg_err("at least one variant is required".into()));
        }
        let envs: Vec<(String, EnvSpec)> = match (&self.stack_sizes, &self.run.env) {
            (None, env) => vec![(self.name.clone(), env.clone())],
            (Some(sizes), EnvSpec::Cube { acceptance, horizon, delta, bonus, .. }) => sizes
                .iter()
                .map(|&n| {
                    let env = EnvSpec::Cube {
                        stack_size: n,
                        acceptance: *acceptance,
                        horizon: *horizon,
                        delta: *delta,
                        bonus: *bonus,
                    };
                    (format!("stack-{n}"), env)
                })
                .collect(),
            (Some(_), _) => return Err(cfg_err("stack_sizes only applies to cube environments".into())),
        };
        let mut arms = Vec::new();
        for (label, env) in envs {
            let mut config = base_config(&self.run, env);
            if let Some(b) = &ov.backend {
                config.oracle = oracle_for_backend(&config.oracle, b)?;
            }
            if let Some(t) = ov.temperature {
                config.temperature = t;
            }
            config.validate().map_err(|e| cfg_err(format!("{label}: {e}")))?;
            config.env.build().map_err(|e| cfg_err(format!("{label}: {e}")))?;
            arms.push(Arm { label, config });
        }
        let out = ov
            .out
            .clone()
            .or(self.out)
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name));
        Ok(Experiment {
            name: self.name,
            seeds,
            variants,
            arms,
            out,
            cache: ov.cache.clone().or(self.cache),
        })
    }
}
