//! Persistent store of oracle responses.
//!
//! At temperature 0 a key holds one response and the backend is called once.
//! Above 0 a miss fills a pool of `pool_size` responses and every later hit
//! draws one of them uniformly.
//!
//! File format: a JSON header line followed by one JSON record per key.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Environment;
use crate::oracle::{OracleBackend, OracleError, OracleQuery, OracleResponse};
use crate::rng::RngStream;

pub const FORMAT: &str = "lagr-oracle-cache";
pub const VERSION: u32 = 1;
pub const DEFAULT_POOL: usize = 10;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path} has unsupported cache header {found:?}")]
    Header { path: PathBuf, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub env_id: String,
    pub descriptor_id: String,
    pub rendered_state: String,
    /// Temperature in hundredths.
    pub temperature_bucket: u32,
}

impl CacheKey {
    pub fn for_query(query: &OracleQuery) -> Self {
        Self {
            env_id: query.env_id.clone(),
            descriptor_id: query.descriptor_id.clone(),
            rendered_state: query.rendered_state.clone(),
            temperature_bucket: temperature_bucket(query.temperature),
        }
    }
}

pub fn temperature_bucket(tau: f64) -> u32 {
    (tau.clamp(0.0, 1.0) * 100.0).round() as u32
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    #[serde(flatten)]
    key: CacheKey,
    responses: Vec<String>,
}

/// What a load found besides the entries themselves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub loaded: usize,
    pub warnings: Vec<String>,
}

/// Result of one cached lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheOutcome {
    pub text: String,
    pub served_from_cache: bool,
    pub backend_calls: usize,
}

#[derive(Debug)]
pub struct OracleCache {
    entries: RwLock<HashMap<CacheKey, Vec<String>>>,
    // serializes misses so one key is never filled twice
    fill: Mutex<()>,
    pool_size: usize,
}

impl Default for OracleCache {
    fn default() -> Self {
        Self::new(DEFAULT_POOL)
    }
}

impl Clone for OracleCache {
    fn clone(&self) -> Self {
        Self {
            entries: RwLock::new(self.read().clone()),
            fill: Mutex::new(()),
            pool_size: self.pool_size,
        }
    }
}

impl PartialEq for OracleCache {
    fn eq(&self, other: &Self) -> bool {
        *self.read() == *other.read()
    }
}

impl OracleCache {
    pub fn new(pool_size: usize) -> Self {
        assert!(pool_size > 0, "pool size must be positive");
        Self {
            entries: RwLock::new(HashMap::new()),
            fill: Mutex::new(()),
            pool_size,
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, HashMap<CacheKey, Vec<String>>> {
        self.entries.read().expect("cache lock poisoned")
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<CacheKey, Vec<String>>> {
        self.entries.write().expect("cache lock poisoned")
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn len(&self) -> usize {
        self.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.read().is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<Vec<String>> {
        self.read().get(key).cloned()
    }

    /// Inserts or replaces an entry. Returns the previous responses, if any.
    pub fn insert(&self, key: CacheKey, responses: Vec<String>) -> Option<Vec<String>> {
        assert!(!responses.is_empty(), "cache entries hold at least one response");
        self.write().insert(key, responses)
    }

    /// All entries in key order.
    pub fn entries(&self) -> BTreeMap<CacheKey, Vec<String>> {
        self.read().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    /// Entry counts per temperature bucket.
    pub fn stats(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for k in self.read().keys() {
            *out.entry(k.temperature_bucket).or_default() += 1;
        }
        out
    }

    /// Copies every entry of `other` into `self`; `other` wins on conflicts.
    /// Returns the keys that were overwritten with different responses.
    pub fn merge(&self, other: &OracleCache) -> Vec<CacheKey> {
        let incoming = other.entries();
        let mut map = self.write();
        let mut conflicts = Vec::new();
        for (k, v) in incoming {
            if let Some(old) = map.insert(k.clone(), v.clone()) {
                if old != v {
                    conflicts.push(k);
                }
            }
        }
        conflicts
    }

    fn pick(pool: &[String], tau_bucket: u32, rng: &mut RngStream) -> String {
        if tau_bucket == 0 || pool.len() == 1 {
            pool[0].clone()
        } else {
            pool[rng.below(pool.len())].clone()
        }
    }

    /// Looks `query` up, filling the entry from `backend` on a miss.
    pub fn complete<B: OracleBackend + ?Sized>(
        &self,
        backend: &B,
        query: &OracleQuery,
        rng: &mut RngStream,
    ) -> Result<CacheOutcome, OracleError> {
        let key = CacheKey::for_query(query);
        if let Some(pool) = self.read().get(&key) {
            return Ok(CacheOutcome {
                text: Self::pick(pool, key.temperature_bucket, rng),
                served_from_cache: true,
                backend_calls: 0,
            });
        }
        let _guard = self.fill.lock().expect("cache fill lock poisoned");
        // another thread may have filled the key while we waited
        if let Some(pool) = self.read().get(&key) {
            return Ok(CacheOutcome {
                text: Self::pick(pool, key.temperature_bucket, rng),
                served_from_cache: true,
                backend_calls: 0,
            });
        }
        let wanted = if key.temperature_bucket == 0 { 1 } else { self.pool_size };
        let mut pool = Vec::with_capacity(wanted);
        for _ in 0..wanted {
            pool.push(backend.complete(query)?);
        }
        let text = Self::pick(&pool, key.temperature_bucket, rng);
        self.write().insert(key, pool);
        Ok(CacheOutcome {
            text,
            served_from_cache: false,
            backend_calls: wanted,
        })
    }

    /// Reads a cache file. A missing file gives an empty cache.
    pub fn load(path: &Path, pool_size: usize) -> Result<(Self, LoadReport), CacheError> {
        let cache = Self::new(pool_size);
        let mut report = LoadReport::default();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((cache, report)),
            Err(source) => {
                return Err(CacheError::Read {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
        if let Some((_, first)) = lines.peek() {
            match serde_json::from_str::<Header>(first) {
                Ok(h) if h.format == FORMAT && h.version == VERSION => {
                    lines.next();
                }
                Ok(_) => {
                    return Err(CacheError::Header {
                        path: path.to_path_buf(),
                        found: first.to_string(),
                    })
                }
                Err(_) => report.warnings.push(format!("{}: missing header line", path.display())),
            }
        }
        let mut map = cache.write();
        for (i, line) in lines {
            match serde_json::from_str::<Record>(line) {
                Ok(r) if !r.responses.is_empty() => {
                    if map.insert(r.key, r.responses).is_some() {
                        report.warnings.push(format!("{}:{}: duplicate key, later record kept", path.display(), i + 1));
                    }
                    report.loaded += 1;
                }
                Ok(_) => report.warnings.push(format!("{}:{}: record without responses skipped", path.display(), i + 1)),
                Err(e) => report.warnings.push(format!("{}:{}: corrupt record skipped ({e})", path.display(), i + 1)),
            }
        }
        drop(map);
        for w in &report.warnings {
            log::warn!("{w}");
        }
        Ok((cache, report))
    }

    /// Writes all entries in key order via a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let werr = |source| CacheError::Write {
            path: path.to_path_buf(),
            source,
        };
        let mut out = Vec::new();
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(werr)?;
        for (key, responses) in self.entries() {
            let line = serde_json::to_string(&Record { key, responses }).expect("record serializes");
            writeln!(out, "{line}").map_err(werr)?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, out).map_err(werr)?;
        fs::rename(&tmp, path).map_err(werr)
    }
}

/// Cached oracle call with the response parsed against `env`.
pub fn cached_query<E: Environment, B: OracleBackend + ?Sized>(
    cache: &OracleCache,
    backend: &B,
    env: &E,
    query: &OracleQuery,
    rng: &mut RngStream,
) -> Result<(OracleResponse<E::Pattern>, usize), OracleError> {
    let out = cache.complete(backend, query, rng)?;
    let resp = OracleResponse::from_text(env, out.text, backend.backend_id(), out.served_from_cache);
    Ok((resp, out.backend_calls))
}
