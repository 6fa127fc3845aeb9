use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::summary::{summarize, Summary};
use super::sweep::{seed_sets, SweepRow};
use crate::error::{io_err, Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Hex SHA-256 of the canonical config text below.
    pub config_sha256: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub cells: usize,
    pub diverged_cells: usize,
    pub train_episode_seeds: usize,
    pub eval_episode_seeds: usize,
    /// Evaluation episodes never reuse a training seed.
    pub train_eval_disjoint: bool,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<Manifest> {
    let config = cfg.to_toml_string()?;
    let (train_set, eval_set) = seed_sets(cfg);
    Ok(Manifest {
        tool: "xrslot".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&config),
        config,
        seeds: cfg.seeds.clone(),
        cells: rows.len(),
        diverged_cells: rows.iter().filter(|r| !r.is_ok()).count(),
        train_episode_seeds: train_set.len(),
        eval_episode_seeds: eval_set.len(),
        train_eval_disjoint: train_set.is_disjoint(&eval_set),
    })
}

pub fn write_results_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes `results.csv`, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, rows: &[SweepRow], dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_results_csv(rows, &dir.join(RESULTS_FILE))?;
    let summary = summarize(cfg, rows)?;
    write_json(&summary, &dir.join(SUMMARY_FILE))?;
    write_json(&manifest(cfg, rows)?, &dir.join(MANIFEST_FILE))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
