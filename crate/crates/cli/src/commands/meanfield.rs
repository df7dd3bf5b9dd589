use std::path::Path;

use qca_core::meanfield::{
    mf_critical_line, mf_phase_diagram, order_boundary, scaled_threshold, CriticalRecord, PhaseDiagram, RunConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::MeanfieldConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{create_dir, timestamp, write_bytes, write_json, Manifest, MANIFEST_FILE};
use crate::svg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLine {
    /// Threshold at 2001 samples, and as applied to this grid.
    pub gradient_threshold: f64,
    pub applied_threshold: f64,
    pub records: Vec<CriticalRecord>,
    /// Midpoint between the last discontinuous and first continuous `p1`.
    pub order_boundary: Option<f64>,
}

pub fn phase_diagram_svg(d: &PhaseDiagram) -> String {
    svg::heatmap(
        "Mean-field stationary density",
        "p2",
        "p1",
        &d.p2_grid,
        &d.p1_grid,
        &d.n_stationary,
        0.5f64.max(d.n_stationary.iter().flatten().fold(0.0, |a: f64, &b| a.max(b))),
    )
}

pub fn run(config: &MeanfieldConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    let (p1_grid, p2_grid) = (config.p1_grid.checked("p1")?, config.p2_grid.checked("p2")?);
    let diagram = mf_phase_diagram(
        &p1_grid,
        &p2_grid,
        RunConfig {
            max_iter: config.max_iter,
            tol: config.tol,
        },
    )?;
    let records = mf_critical_line(&diagram, config.gradient_threshold)?;
    let line = CriticalLine {
        gradient_threshold: config.gradient_threshold,
        applied_threshold: scaled_threshold(config.gradient_threshold, &p2_grid),
        order_boundary: order_boundary(&records),
        records,
    };
    create_dir(out)?;
    write_json(&out.join("phase_diagram.json"), &diagram)?;
    let csv_path = out.join("phase_diagram.csv");
    let mut buf = Vec::new();
    diagram.write_csv(&mut buf).map_err(|e| CliError::at(&csv_path, e))?;
    write_bytes(&csv_path, &buf)?;
    write_json(&out.join("critical_line.json"), &line)?;
    let mut outputs: Vec<String> = ["phase_diagram.json", "phase_diagram.csv", "critical_line.json"].map(String::from).into();
    if config.svg {
        write_bytes(&out.join("phase_diagram.svg"), phase_diagram_svg(&diagram).as_bytes())?;
        outputs.push("phase_diagram.svg".into());
    }
    write_json(&out.join(MANIFEST_FILE), &Manifest::new("meanfield", timestamp()?, config, outputs))?;
    match line.order_boundary {
        Some(b) => println!("order boundary at p1 = {b:.4}"),
        None => println!("no discontinuous-to-continuous change on this p1 grid"),
    }
    if diagram.unconverged > 0 {
        println!("{} grid points hit max_iter = {}", diagram.unconverged, diagram.max_iter);
    }
    println!("wrote {}", out.display());
    Ok(())
}
