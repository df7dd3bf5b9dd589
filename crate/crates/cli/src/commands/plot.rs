use std::path::{Path, PathBuf};

use qca_core::criticality::{effective_exponent, ALPHA_DP, ALPHA_QCP};
use qca_core::meanfield::PhaseDiagram;
use qca_core::TimeSeries;

use super::meanfield::phase_diagram_svg;
use crate::error::{CliError, CliResult};
use crate::manifest::{read_json, write_bytes};
use crate::svg::{Line, LinePlot, Reference, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    PhaseDiagram,
    Series,
    EffectiveExponent,
}

fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    TimeSeries::read_csv(file).map_err(|e| CliError::at(path, e))
}

fn label(path: &Path) -> String {
    // a scan point is named by its directory pair
    let parts: Vec<String> = path
        .iter()
        .rev()
        .skip(1)
        .take(2)
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| s.contains('='))
        .collect();
    if parts.is_empty() {
        path.display().to_string()
    } else {
        parts.into_iter().rev().collect::<Vec<_>>().join(" ")
    }
}

pub fn render(kind: PlotKind, inputs: &[PathBuf], title: Option<&str>) -> CliResult<String> {
    if inputs.is_empty() {
        return Err(CliError::Validation("plot needs at least one input".into()));
    }
    match kind {
        PlotKind::PhaseDiagram => {
            if inputs.len() != 1 {
                return Err(CliError::Validation("phase-diagram plots take exactly one JSON input".into()));
            }
            let d: PhaseDiagram = read_json(&inputs[0])?;
            Ok(phase_diagram_svg(&d))
        }
        PlotKind::Series => {
            let lines = inputs
                .iter()
                .map(|p| {
                    let s = read_series(p)?;
                    Ok(Line {
                        label: label(p),
                        points: s.times.iter().map(|&t| t as f64).zip(s.n_mean.iter().copied()).collect(),
                        dashed: false,
                    })
                })
                .collect::<CliResult<_>>()?;
            Ok(LinePlot {
                title: title.unwrap_or("Mean density").into(),
                x_label: "t".into(),
                y_label: "n_mean".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                lines,
                references: Vec::new(),
            }
            .render())
        }
        PlotKind::EffectiveExponent => {
            let lines = inputs
                .iter()
                .map(|p| {
                    let s = read_series(p)?;
                    Ok(Line {
                        label: label(p),
                        points: effective_exponent(&s).points.iter().map(|&(t, a)| (t as f64, a)).collect(),
                        dashed: false,
                    })
                })
                .collect::<CliResult<_>>()?;
            Ok(LinePlot {
                title: title.unwrap_or("Effective exponent").into(),
                x_label: "t".into(),
                y_label: "α(t)".into(),
                lines,
                references: [ALPHA_DP, ALPHA_QCP]
                    .iter()
                    .map(|r| Reference {
                        label: format!("{} {}", r.name, r.value),
                        y: r.value,
                    })
                    .collect(),
                ..Default::default()
            }
            .render())
        }
    }
}

pub fn run(kind: PlotKind, inputs: &[PathBuf], out: &Path, title: Option<&str>) -> CliResult<()> {
    let svg = render(kind, inputs, title)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::manifest::create_dir(dir)?;
    }
    write_bytes(out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
