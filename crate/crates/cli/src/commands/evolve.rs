use std::path::Path;

use qca_core::dense::{self, RowState};
use qca_core::mps::{self, StepDiagnostics, VectorizedMps};
use qca_core::{LocalOperators, TimeSeries};

use crate::config::{Backend, EvolveConfig, SimConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{create_dir, timestamp, write_bytes, write_json, Manifest, MANIFEST_FILE};

pub const SERIES_FILE: &str = "series.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

pub struct Trajectory {
    pub series: TimeSeries,
    /// MPS only.
    pub diagnostics: Option<Vec<StepDiagnostics>>,
}

pub fn simulate(p1: f64, p2: f64, sim: &SimConfig) -> qca_core::Result<Trajectory> {
    let ops = LocalOperators::from_probabilities(p1, p2)?;
    let kind = sim.initial.kind();
    match sim.backend {
        Backend::Dense => {
            let state = RowState::initial(sim.l, &kind)?;
            let series = dense::evolve(&state, &ops, sim.t, sim.observables(), sim.dense_method.into())?;
            Ok(Trajectory {
                series,
                diagnostics: None,
            })
        }
        Backend::Mps => {
            let start = VectorizedMps::from_product(sim.l, &kind, sim.chi, sim.cutoff)?;
            let (series, diags) = mps::evolve(&start, &ops, sim.t, sim.observables())?;
            Ok(Trajectory {
                series,
                diagnostics: Some(diags),
            })
        }
    }
}

/// Write `series.csv`, `diagnostics.csv` (MPS) and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, config: &EvolveConfig, run: &Trajectory, created: String) -> CliResult<()> {
    create_dir(dir)?;
    let mut outputs = vec![SERIES_FILE.to_string()];
    let path = dir.join(SERIES_FILE);
    write_bytes(&path, run.series.to_csv_string().map_err(|e| CliError::at(&path, e))?.as_bytes())?;
    if let Some(diags) = &run.diagnostics {
        let path = dir.join(DIAGNOSTICS_FILE);
        let mut buf = Vec::new();
        mps::write_diagnostics_csv(diags, &mut buf).map_err(|e| CliError::at(&path, e))?;
        write_bytes(&path, &buf)?;
        outputs.push(DIAGNOSTICS_FILE.into());
    }
    write_json(&dir.join(MANIFEST_FILE), &Manifest::new("evolve", created, config, outputs))
}

pub fn run(config: &EvolveConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    let (p1, p2) = config.probabilities()?;
    let trajectory = simulate(p1, p2, &config.sim)?;
    write_run(out, config, &trajectory, timestamp()?)?;
    let last = trajectory.series.n_mean.last().copied().unwrap_or(f64::NAN);
    println!("n_mean(T={}) = {last:.6e}; wrote {}", config.sim.t, out.display());
    Ok(())
}
