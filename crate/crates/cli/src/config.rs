//! The JSON run configuration consumed by `relict rank`.

use std::fs;
use std::path::{Path, PathBuf};

use relict_core::engine::{MeasureKind, MeasureSpec, PipelineOptions, ThresholdConfig, DEFAULT_N};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const WORKERS_ENV: &str = "RELICT_WORKERS";

/// A measure given either by name or with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureEntry {
    Name(MeasureKind),
    Spec(MeasureSpec),
}

impl MeasureEntry {
    pub fn spec(&self) -> MeasureSpec {
        match self {
            MeasureEntry::Name(k) => MeasureSpec::new(*k),
            MeasureEntry::Spec(s) => *s,
        }
    }
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_budget() -> usize {
    1024
}

fn default_pool() -> [usize; 3] {
    [4, 4, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub training_manifest: PathBuf,
    pub synthetic_manifest: PathBuf,
    pub measures: Vec<MeasureEntry>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub thresholds: Option<ThresholdConfig>,
    pub output_dir: PathBuf,
    /// 0 means one worker per core.
    #[serde(default)]
    pub worker_count: usize,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: usize,
    /// Pooling target for feature maps.
    #[serde(default = "default_pool")]
    pub pool_size: [usize; 3],
}

impl RunConfig {
    /// Parse `path`; relative paths inside resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [
            &mut cfg.training_manifest,
            &mut cfg.synthetic_manifest,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        for m in [&self.training_manifest, &self.synthetic_manifest] {
            if !m.is_file() {
                return Err(CliError::config(format!("manifest {} does not exist", m.display())));
            }
        }
        if self.measures.is_empty() {
            return Err(CliError::config("no measures configured"));
        }
        if self.n < 2 {
            return Err(CliError::config(format!("n = {} must be at least 2", self.n)));
        }
        if let Some(t) = &self.thresholds {
            t.validate().map_err(|e| CliError::config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn specs(&self) -> Vec<MeasureSpec> {
        self.measures.iter().map(MeasureEntry::spec).collect()
    }

    /// Pipeline options, with the worker count taken from
    /// `RELICT_WORKERS` when it is set.
    pub fn pipeline_options(&self, workers_env: Option<&str>) -> CliResult<PipelineOptions> {
        let workers = match workers_env {
            Some(v) => v.trim().parse().map_err(|_| {
                CliError::config(format!("{WORKERS_ENV}='{v}' is not a worker count"))
            })?,
            None => self.worker_count,
        };
        Ok(PipelineOptions {
            n: self.n,
            thresholds: self.thresholds.clone(),
            workers,
            memory_budget_mb: self.memory_budget_mb,
            pool_size: self.pool_size,
        })
    }
}
