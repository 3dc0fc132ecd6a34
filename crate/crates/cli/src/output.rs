use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const METADATA_FILE: &str = "metadata.json";

/// Output directory plus the thread pool shared by one command run.
pub struct Context {
    out: PathBuf,
    command: &'static str,
    pool: Option<rayon::ThreadPool>,
}

impl Context {
    /// Creates `out` if needed. `jobs == 1` runs everything on the calling thread.
    pub fn new(out: PathBuf, jobs: usize, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
        let pool = if jobs == 1 {
            None
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Some(pool)
        };
        Ok(Self { out, command, pool })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    /// Maps `f` over `items`, in parallel when a pool is configured. Results keep input order
    /// and the first failing item (by position) determines the error.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Result<Vec<U>, CliError>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U, CliError> + Sync + Send,
    {
        let results: Vec<Result<U, CliError>> = match &self.pool {
            None => items.iter().map(&f).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        };
        results.into_iter().collect()
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::from(stepseq::Error::Io { path, source: e }))?;
        log::info!("wrote {}", self.out.join(name).display());
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<(), CliError> {
        self.write(name, &stepseq::corpus::to_jsonl(records))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn write_metadata(&self, seed: Option<Seed>, params: Value, results: Value) -> Result<(), CliError> {
        let meta = Metadata {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed: seed.map(|s| s.value),
            seed_generated: seed.is_some_and(|s| s.generated),
            params,
            results,
        };
        self.write_json(METADATA_FILE, &meta)
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: &'static str,
    pub version: &'static str,
    /// Seconds since the Unix epoch; the only field allowed to differ between reruns.
    pub timestamp: u64,
    pub seed: Option<u64>,
    pub seed_generated: bool,
    pub params: Value,
    pub results: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub value: u64,
    pub generated: bool,
}

impl Seed {
    /// The given seed, or a fresh one that the metadata will flag as generated.
    pub fn resolve(given: Option<u64>) -> Self {
        match given {
            Some(value) => Seed {
                value,
                generated: false,
            },
            None => {
                let value = rand::random();
                log::warn!("no --seed given; using generated seed {value}");
                Seed { value, generated: true }
            }
        }
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    stepseq::corpus::read_jsonl(path).map_err(CliError::ctx(format!("reading {what} {}", path.display())))
}
