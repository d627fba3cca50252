//! Experiment drivers, their configuration and their outputs.
//!
//! Every experiment fans replicas out over rayon. Replica `r` at size `n`
//! draws from ChaCha8 stream `n` under seed `seed + r`, and results are
//! reduced in replica order, so tables are byte-identical for any thread
//! count.

mod config;
mod ensemble;
mod table;
mod theorems;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rng::{replica_seed, stream, SimRng};

pub use config::{default_model, BpSettings, ExperimentConfig, ExperimentKind};
pub use ensemble::{exp_de_match, exp_graph_stats};
pub use table::{ResultRow, ResultTable, COLUMNS};
pub use theorems::{correlation_bound, exp_bp_vs_exact, exp_calibration, exp_correlation_decay, exp_entropy_identity};

pub(crate) fn replicate<T, F>(cfg: &ExperimentConfig, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng) -> Result<T> + Sync,
{
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| f(&mut stream(replica_seed(cfg.seed, r), n as u64)))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg.experiment {
        ExperimentKind::CorrelationDecay => exp_correlation_decay(cfg),
        ExperimentKind::BpVsExact => exp_bp_vs_exact(cfg),
        ExperimentKind::DeMatch => exp_de_match(cfg),
        ExperimentKind::EntropyIdentity => exp_entropy_identity(cfg),
        ExperimentKind::GraphStats => exp_graph_stats(cfg),
        ExperimentKind::Calibration => exp_calibration(cfg),
    }
}

/// Everything needed to reproduce a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub output: String,
    pub rows: usize,
    pub config: Value,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, table: &ResultTable, output: &Path, threads: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: cfg.experiment.name().into(),
            seed: cfg.seed,
            threads,
            output: output.display().to_string(),
            rows: table.rows.len(),
            config: cfg.to_json(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config("<manifest>", e.to_string()))
    }

    /// The configuration recorded in the manifest.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(&self.config, None, None)
    }
}

/// Manifest path next to a CSV: `out.csv` -> `out.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Writes the table CSV and its manifest, returning the manifest path.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable, csv: &Path, threads: usize) -> Result<PathBuf> {
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(csv, table.to_csv())?;
    let manifest = Manifest::new(cfg, table, csv, threads);
    let path = manifest_path(csv);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}
