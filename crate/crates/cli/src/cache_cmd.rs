//! Inspecting and combining cache files.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Result;
use lagr_core::cache::{OracleCache, DEFAULT_POOL};
use serde::Serialize;

fn load(path: &Path) -> Result<OracleCache> {
    let (cache, report) = OracleCache::load(path, DEFAULT_POOL)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cache)
}

pub fn stats(path: &Path, out: &mut impl Write) -> Result<()> {
    let cache = load(path)?;
    writeln!(out, "entries {}", cache.len())?;
    for (bucket, count) in cache.stats() {
        writeln!(out, "temperature {:.2}: {count}", bucket as f64 / 100.0)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DumpRow<'a> {
    env_id: &'a str,
    descriptor_id: &'a str,
    temperature: f64,
    state: &'a str,
    responses: &'a [String],
}

/// One JSON object per key, in key order.
pub fn dump(path: &Path, out: &mut impl Write) -> Result<()> {
    for (key, responses) in load(path)?.entries() {
        let row = DumpRow {
            env_id: &key.env_id,
            descriptor_id: &key.descriptor_id,
            temperature: key.temperature_bucket as f64 / 100.0,
            state: &key.rendered_state,
            responses: &responses,
        };
        writeln!(out, "{}", serde_json::to_string(&row)?)?;
    }
    Ok(())
}

/// Unions `inputs` in order into `output`; later files win on conflicts.
pub fn merge(output: &Path, inputs: &[PathBuf], out: &mut impl Write) -> Result<()> {
    let merged = OracleCache::new(DEFAULT_POOL);
    let mut conflicts = 0;
    for path in inputs {
        for key in merged.merge(&load(path)?) {
            eprintln!(
                "warning: {} overrides the entry for {:?} at temperature {:.2}",
                path.display(),
                key.rendered_state,
                key.temperature_bucket as f64 / 100.0
            );
            conflicts += 1;
        }
    }
    merged.save(output)?;
    writeln!(out, "merged {} entries, {conflicts} conflicts", merged.len())?;
    Ok(())
}
