mod bench;
mod bundle;
mod cache_cmd;
mod experiment;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lagr_core::orchestrator::{EnvSpec, Gating};

use experiment::{ExperimentFile, Overrides};

/// Bad input from the user: unreadable or invalid configuration, unknown
/// keys, missing credentials. Exits with status 2.
#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Writes through a `.partial` file so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    std::fs::write(&partial, bytes).with_context(|| format!("writing {}", partial.display()))?;
    std::fs::rename(&partial, path).with_context(|| format!("renaming {}", partial.display()))
}

#[derive(Parser)]
#[command(name = "lagr", version, about = "Language-guided reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Experiment file (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name; see `lagr presets`.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn text(&self) -> Result<(String, String)> {
        match (&self.config, &self.preset) {
            (Some(path), _) => Ok((experiment::read_source(path)?, path.display().to_string())),
            (None, Some(name)) => Ok((experiment::preset(name)?.to_string(), format!("preset {name}"))),
            (None, None) => Err(ConfigError::new("pass --config PATH or --preset NAME").into()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of an experiment and write the report bundle.
    Run {
        #[command(flatten)]
        source: Source,
        /// Comma-separated seeds, replacing the file's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Oracle backend: scripted or http. The http credential is read from
        /// the environment variable named in the config (OPENAI_API_KEY by default).
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, value_name = "PATH")]
        cache: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Gating for every oracle variant: seq, always or never.
        #[arg(long)]
        gating: Option<Gating>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Oracle accuracy as a function of how much of the target the prompt shows.
    BenchOracle {
        #[command(flatten)]
        source: Source,
        /// Environment when no file is given: cube, image or arrangement.
        #[arg(long, default_value = "cube")]
        env: String,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Queries per fraction.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
        /// CSV destination; stdout when absent.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Inspect or combine oracle cache files.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Convert a run bundle into plot-ready series files.
    Report {
        bundle: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// List presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Entry counts per temperature.
    Stats { path: PathBuf },
    /// Every record as one JSON line.
    Dump { path: PathBuf },
    /// Union of the inputs; later files win on conflicting keys.
    Merge {
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn bench_file(source: &Source, env: &str) -> Result<bench::BenchFile> {
    if source.config.is_some() || source.preset.is_some() {
        let (text, origin) = source.text()?;
        return experiment::parse_toml(&text, &origin);
    }
    let env = match env {
        "cube" => EnvSpec::cube(8),
        "image" => EnvSpec::image("oval10"),
        "arrangement" => EnvSpec::arrangement("diamond5"),
        other => anyhow::bail!(ConfigError::new(format!(
            "unknown environment {other:?} (expected cube, image or arrangement)"
        ))),
    };
    Ok(bench::BenchFile {
        env,
        oracle: Default::default(),
        n: 100,
        temperature: 0.0,
        fractions: bench::default_fractions(),
        seed: 0,
    })
}

fn execute(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run {
            source,
            seeds,
            backend,
            cache,
            out,
            gating,
            temperature,
        } => {
            let (text, origin) = source.text()?;
            let overrides = Overrides {
                seeds,
                backend,
                cache,
                out,
                gating,
                temperature,
            };
            let exp = ExperimentFile::parse(&text, &origin)?.resolve(&overrides)?;
            let summary = bundle::run(&exp)?;
            use std::io::Write;
            for (config, results) in &summary.results {
                for r in results {
                    writeln!(
                        stdout,
                        "{config} {}: total mean return {:.2}, queries {:.1} ± {:.1}",
                        r.variant,
                        r.aggregate.total_mean_return(),
                        r.aggregate.queries.mean,
                        r.aggregate.queries.stderr
                    )?;
                }
            }
            for (config, variant, ratio) in &summary.ratios {
                writeln!(stdout, "{config} {variant}: performance ratio {ratio:.3}")?;
            }
            writeln!(stdout, "wrote {}", summary.out.display())?;
        }
        Command::BenchOracle {
            source,
            env,
            backend,
            fractions,
            n,
            temperature,
            out,
        } => {
            let mut bench = bench_file(&source, &env)?;
            if let Some(b) = backend {
                bench.oracle = experiment::oracle_for_backend(&bench.oracle, &b)?;
            }
            if let Some(f) = fractions {
                bench.fractions = f;
            }
            if let Some(n) = n {
                bench.n = n;
            }
            if let Some(t) = temperature {
                bench.temperature = t;
            }
            let rows = bench::run(&bench)?;
            bench::write_csv(&rows, out.as_deref())?;
        }
        Command::Cache { action } => match action {
            CacheAction::Stats { path } => cache_cmd::stats(&path, &mut stdout)?,
            CacheAction::Dump { path } => cache_cmd::dump(&path, &mut stdout)?,
            CacheAction::Merge { out, inputs } => cache_cmd::merge(&out, &inputs, &mut stdout)?,
        },
        Command::Report { bundle, out } => {
            use std::io::Write;
            for path in report::report(&bundle, out.as_deref())? {
                writeln!(stdout, "{}", path.display())?;
            }
        }
        Command::Presets { name } => {
            use std::io::Write;
            match name {
                Some(n) => write!(stdout, "{}", experiment::preset(&n)?)?,
                None => {
                    for (n, _) in experiment::PRESETS {
                        writeln!(stdout, "{n}")?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
