use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evolve::{simulate, write_run};
use crate::config::{EvolveConfig, ScanConfig};
use crate::error::{CliError, CliResult, EXIT_IO};
use crate::manifest::{create_dir, timestamp, write_json, MANIFEST_FILE, TOOL, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub p1: f64,
    pub p2: f64,
    /// Directory of the point, relative to the scan root.
    pub path: String,
    pub status: PointStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created: String,
    pub config: ScanConfig,
    /// p1-major grid order.
    pub entries: Vec<ScanEntry>,
}

/// `p1=<v>/p2=<v>` with the shortest round-tripping decimal.
pub fn point_dir(p1: f64, p2: f64) -> String {
    format!("p1={p1}/p2={p2}")
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn run(config: &ScanConfig, out: &Path, jobs: usize) -> CliResult<()> {
    config.validate()?;
    if jobs == 0 {
        return Err(CliError::Validation("jobs must be at least 1".into()));
    }
    let (p1_grid, p2_grid) = config.grids()?;
    create_dir(out)?;
    let created = timestamp()?;
    let points: Vec<(f64, f64)> = p1_grid.iter().flat_map(|&a| p2_grid.iter().map(move |&b| (a, b))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
    // workers share only the immutable config; assembly follows grid order
    let results: Vec<CliResult<()>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(p1, p2)| {
                let point = EvolveConfig {
                    p1: Some(p1),
                    p2: Some(p2),
                    sim: config.sim.clone(),
                };
                let run = simulate(p1, p2, &config.sim)?;
                write_run(&out.join(point_dir(p1, p2)), &point, &run, created.clone())
            })
            .collect()
    });
    let entries: Vec<ScanEntry> = points
        .iter()
        .zip(&results)
        .map(|(&(p1, p2), r)| ScanEntry {
            p1,
            p2,
            path: point_dir(p1, p2),
            status: if r.is_ok() { PointStatus::Ok } else { PointStatus::Failed },
            error: r.as_ref().err().map(|e| e.to_string()),
            exit_code: r.as_ref().err().map(CliError::exit_code),
        })
        .collect();
    let manifest = ScanManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: "scan".into(),
        created,
        config: config.clone(),
        entries,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let failed: Vec<&ScanEntry> = manifest.entries.iter().filter(|e| e.status == PointStatus::Failed).collect();
    println!(
        "{} points, {} failed; wrote {}",
        manifest.entries.len(),
        failed.len(),
        out.display()
    );
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(CliError::PartialScan {
            failed: failed.len(),
            total: manifest.entries.len(),
            first: format!("{}: {}", first.path, first.error.as_deref().unwrap_or("")),
            code: first.exit_code.unwrap_or(EXIT_IO),
        }),
    }
}

