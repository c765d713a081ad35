//! Long-format result rows, the fixed CSV schema, and the run manifest.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One long-format result cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub param: String,
    pub param_value: String,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    pub fn new(
        experiment: &str,
        seed: u64,
        param: &str,
        param_value: impl ToString,
        metric: &str,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            param: param.to_string(),
            param_value: param_value.to_string(),
            metric: metric.to_string(),
            value,
        }
    }
}

pub const CSV_HEADER: &str = "experiment,seed,param,param_value,metric,value";

/// Serialize rows in their given order; the schema is fixed and none of the
/// fields may contain commas.
pub fn write_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<(), CliError> {
    writeln!(out, "{CSV_HEADER}").map_err(|e| CliError::Runtime(e.to_string()))?;
    for row in rows {
        debug_assert!(
            !row.param.contains(',') && !row.param_value.contains(',') && !row.metric.contains(','),
            "CSV fields must stay comma-free"
        );
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.experiment, row.seed, row.param, row.param_value, row.metric, row.value
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

/// Provenance sidecar written next to every CSV.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub build_version: String,
    pub rows: usize,
}

pub fn config_hash(raw: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_outputs(
    dir: &Path,
    stem: &str,
    rows: &[ResultRow],
    manifest: &Manifest,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_csv(std::io::BufWriter::new(file), rows)?;
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let json =
        serde_json::to_string_pretty(manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(manifest_path, json).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}
