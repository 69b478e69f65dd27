//! Turns a run bundle into per-figure series files for external plotting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::bundle::{csv_bytes, QUERIES, QUERY_COLUMNS, RETURNS, RETURN_COLUMNS};
use crate::ConfigError;

fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        anyhow::bail!("{} has columns {header:?}, expected {expected:?}", path.display());
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

fn band(mean: &str, stderr: &str) -> Result<(f64, f64)> {
    let (m, s): (f64, f64) = (mean.parse()?, stderr.parse()?);
    Ok((m - s, m + s))
}

fn file_stem(config: &str, variant: &str) -> String {
    format!("{config}_{variant}").replace(|c: char| !c.is_ascii_alphanumeric() && c != '-' && c != '_', "-")
}

/// Writes the series files and returns their paths.
pub fn report(bundle: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let missing: Vec<_> = [RETURNS, QUERIES].into_iter().filter(|f| !bundle.join(f).is_file()).collect();
    if !missing.is_empty() {
        anyhow::bail!(ConfigError::new(format!(
            "{} is not a run bundle: missing {} (expected {RETURNS} and {QUERIES})",
            bundle.display(),
            missing.join(", ")
        )));
    }
    let out = out.map_or_else(|| bundle.join("series"), Path::to_path_buf);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut curves: BTreeMap<(String, String), Vec<(String, String, String, f64, f64)>> = BTreeMap::new();
    for rec in read_table(&bundle.join(RETURNS), &RETURN_COLUMNS)? {
        let (lo, hi) = band(&rec[3], &rec[4])?;
        curves
            .entry((rec[0].to_string(), rec[1].to_string()))
            .or_default()
            .push((rec[2].to_string(), rec[3].to_string(), rec[4].to_string(), lo, hi));
    }
    let mut written = Vec::new();
    for ((config, variant), rows) in &curves {
        let path = out.join(format!("returns_{}.csv", file_stem(config, variant)));
        let bytes = csv_bytes(&["episode", "mean", "stderr", "lower", "upper"], rows)?;
        crate::write_atomic(&path, &bytes)?;
        written.push(path);
    }

    let mut bars = Vec::new();
    for rec in read_table(&bundle.join(QUERIES), &QUERY_COLUMNS)? {
        let (lo, hi) = band(&rec[2], &rec[3])?;
        bars.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string(), rec[3].to_string(), lo, hi));
    }
    let path = out.join("queries_bars.csv");
    crate::write_atomic(&path, &csv_bytes(&["config", "variant", "mean", "stderr", "lower", "upper"], &bars)?)?;
    written.push(path);
    Ok(written)
}
