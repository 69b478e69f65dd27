//! Running an experiment and writing its report bundle.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lagr_core::cache::OracleCache;
use lagr_core::orchestrator::{performance_ratio, run_experiment, ExperimentResult, Gating, OracleSpec, Variant};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiment::Experiment;
use crate::ConfigError;

pub const RETURNS: &str = "returns.csv";
pub const QUERIES: &str = "queries.csv";
pub const RATIO: &str = "ratio.csv";
pub const MANIFEST: &str = "manifest.json";

pub const RETURN_COLUMNS: [&str; 5] = ["config", "variant", "episode", "mean", "stderr"];
pub const QUERY_COLUMNS: [&str; 6] = ["config", "variant", "mean", "stderr", "backend_calls", "cache_hits"];

#[derive(Debug, Serialize)]
struct ReturnRow<'a> {
    config: &'a str,
    variant: &'a str,
    episode: usize,
    mean: f64,
    stderr: f64,
}

#[derive(Debug, Serialize)]
struct QueryRow<'a> {
    config: &'a str,
    variant: &'a str,
    mean: f64,
    stderr: f64,
    backend_calls: f64,
    cache_hits: f64,
}

#[derive(Debug, Serialize)]
struct RatioRow<'a> {
    config: &'a str,
    variant: &'a str,
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_hash: String,
    seeds: &'a [u64],
    variants: Vec<String>,
    configs: Vec<&'a str>,
    episodes: Vec<usize>,
    versions: Versions,
}

#[derive(Debug, Serialize)]
struct Versions {
    lagr_cli: &'static str,
    lagr_core: &'static str,
}

/// SHA-256 over the canonical JSON of the resolved experiment.
pub fn config_hash(exp: &Experiment) -> String {
    let json = serde_json::to_vec(exp).expect("experiment serializes");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_credentials(exp: &Experiment) -> Result<()> {
    for arm in &exp.arms {
        if let OracleSpec::Http(h) = &arm.config.oracle {
            let lagr_needs_oracle = exp.variants.iter().any(|v| matches!(v, Variant::Lagr(g) if *g != Gating::Never));
            if lagr_needs_oracle && std::env::var(&h.api_key_env).map_or(true, |k| k.is_empty()) {
                anyhow::bail!(ConfigError::new(format!(
                    "the http backend needs a credential in the {} environment variable",
                    h.api_key_env
                )));
            }
        }
    }
    Ok(())
}

/// Writes `bytes` as `<path>.partial`, to be renamed once every file is ready.
fn stage(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, bytes).with_context(|| format!("writing {}", partial.display()))?;
    Ok(partial)
}

/// CSV with an explicit header, so an empty table still names its columns.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub struct RunSummary {
    pub out: PathBuf,
    pub results: Vec<(String, Vec<ExperimentResult>)>,
    pub ratios: Vec<(String, String, f64)>,
}

pub fn run(exp: &Experiment) -> Result<RunSummary> {
    check_credentials(exp)?;
    let pool = exp.arms.first().map_or(lagr_core::cache::DEFAULT_POOL, |a| a.config.cache_pool);
    let cache = match &exp.cache {
        Some(path) => {
            let (cache, report) = OracleCache::load(path, pool)?;
            log::info!("loaded {} cache entries from {}", report.loaded, path.display());
            cache
        }
        None => OracleCache::new(pool),
    };

    let mut results = Vec::new();
    let mut ratios = Vec::new();
    for arm in &exp.arms {
        let mut per_variant = Vec::new();
        for &variant in &exp.variants {
            log::info!("{}: running {} over {} seeds", arm.label, variant.label(), exp.seeds.len());
            let r = run_experiment(&arm.config, variant, &exp.seeds, &cache)
                .with_context(|| format!("{} / {}", arm.label, variant.label()))?;
            per_variant.push(r);
        }
        if let Some(base) = per_variant.iter().find(|r| r.variant == Variant::Baseline.label()) {
            for r in per_variant.iter().filter(|r| r.variant != base.variant) {
                match performance_ratio(&r.aggregate, &base.aggregate) {
                    Ok(v) => ratios.push((arm.label.clone(), r.variant.clone(), v)),
                    Err(e) => log::warn!("{}: no ratio for {}: {e}", arm.label, r.variant),
                }
            }
        }
        results.push((arm.label.clone(), per_variant));
    }

    if let Some(path) = &exp.cache {
        cache.save(path)?;
    }
    write_bundle(exp, &results, &ratios)?;
    Ok(RunSummary {
        out: exp.out.clone(),
        results,
        ratios,
    })
}

fn write_bundle(
    exp: &Experiment,
    results: &[(String, Vec<ExperimentResult>)],
    ratios: &[(String, String, f64)],
) -> Result<()> {
    fs::create_dir_all(&exp.out).with_context(|| format!("creating {}", exp.out.display()))?;
    let returns = csv_bytes(&RETURN_COLUMNS, results.iter().flat_map(|(label, rs)| {
        rs.iter().flat_map(move |r| {
            r.aggregate.returns.iter().enumerate().map(move |(episode, m)| ReturnRow {
                config: label,
                variant: &r.variant,
                episode,
                mean: m.mean,
                stderr: m.stderr,
            })
        })
    }))?;
    let queries = csv_bytes(&QUERY_COLUMNS, results.iter().flat_map(|(label, rs)| {
        rs.iter().map(move |r| QueryRow {
            config: label,
            variant: &r.variant,
            mean: r.aggregate.queries.mean,
            stderr: r.aggregate.queries.stderr,
            backend_calls: r.aggregate.backend_calls.mean,
            cache_hits: r.aggregate.cache_hits.mean,
        })
    }))?;
    let ratio = csv_bytes(&["config", "variant", "ratio"], ratios.iter().map(|(config, variant, ratio)| RatioRow {
        config,
        variant,
        ratio: *ratio,
    }))?;
    let manifest = Manifest {
        name: &exp.name,
        config_hash: config_hash(exp),
        seeds: &exp.seeds,
        variants: exp.variants.iter().map(|v| v.label()).collect(),
        configs: exp.arms.iter().map(|a| a.label.as_str()).collect(),
        episodes: exp.arms.iter().map(|a| a.config.episodes).collect(),
        versions: Versions {
            lagr_cli: env!("CARGO_PKG_VERSION"),
            lagr_core: lagr_core::VERSION,
        },
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');

    let files = [(RETURNS, returns), (QUERIES, queries), (RATIO, ratio), (MANIFEST, manifest_bytes)];
    let mut staged = Vec::new();
    for (name, bytes) in &files {
        let target = exp.out.join(name);
        staged.push((stage(&target, bytes)?, target));
    }
    for (partial, target) in staged {
        fs::rename(&partial, &target).with_context(|| format!("renaming {}", partial.display()))?;
    }
    Ok(())
}
