use std::path::Path;

use qca_core::lindblad::{compare_at_probabilities, compare_qca_to_lindblad, ComparisonRecord};
use serde::{Deserialize, Serialize};

use crate::config::LindbladCompareConfig;
use crate::error::CliResult;
use crate::manifest::{create_dir, timestamp, write_bytes, write_json, Manifest, MANIFEST_FILE};
use crate::svg::{Line, LinePlot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub gamma_dt: f64,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(max_abs_diff)` against `ln(γδt)`; needs two rows.
    pub loglog_slope: Option<f64>,
}

pub fn loglog_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_abs_diff > 0.0)
        .map(|r| (r.gamma_dt.ln(), r.max_abs_diff.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

pub fn overlay_svg(rec: &ComparisonRecord) -> String {
    let line = |label: &str, ys: &[f64], dashed| Line {
        label: label.into(),
        points: rec.times.iter().copied().zip(ys.iter().copied()).collect(),
        dashed,
    };
    LinePlot {
        title: format!("QCA vs master equation, L = {}, Ω/γ = {:.4}, γδt = {:.4}", rec.l, rec.omega_over_gamma, rec.gamma_dt),
        x_label: "γt".into(),
        y_label: "n_mean".into(),
        lines: vec![line("QCA", &rec.n_mean_qca, false), line("Lindblad", &rec.n_mean_lindblad, true)],
        ..Default::default()
    }
    .render()
}

pub fn run(config: &LindbladCompareConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    let compare = |gamma_dt: f64| -> qca_core::Result<ComparisonRecord> {
        compare_qca_to_lindblad(config.l, config.omega_over_gamma, gamma_dt, config.t_final, config.rate_convention)
    };
    let record = match config.probabilities {
        Some([p1, p2]) => compare_at_probabilities(config.l, p1, p2, config.t_final, config.rate_convention)?,
        None => compare(config.gamma_dt)?,
    };
    create_dir(out)?;
    write_json(&out.join("comparison.json"), &record)?;
    let mut outputs = vec!["comparison.json".to_string()];
    if config.svg {
        write_bytes(&out.join("overlay.svg"), overlay_svg(&record).as_bytes())?;
        outputs.push("overlay.svg".into());
    }
    if !config.halving.is_empty() {
        let rows = config
            .halving
            .iter()
            .map(|&g| {
                Ok(ConvergenceRow {
                    gamma_dt: g,
                    max_abs_diff: compare(g)?.max_abs_diff,
                })
            })
            .collect::<qca_core::Result<Vec<_>>>()?;
        let table = ConvergenceTable {
            loglog_slope: loglog_slope(&rows),
            rows,
        };
        for r in &table.rows {
            println!("γδt = {:<10} max |Δn| = {:.4e}", r.gamma_dt, r.max_abs_diff);
        }
        if let Some(s) = table.loglog_slope {
            println!("log-log slope {s:.3}");
        }
        write_json(&out.join("convergence.json"), &table)?;
        outputs.push("convergence.json".into());
    }
    write_json(&out.join(MANIFEST_FILE), &Manifest::new("lindblad-compare", timestamp()?, config, outputs))?;
    println!(
        "p1 = {:.6e}, p2 = {:.6e}: max |Δn| = {:.4e} over γt ∈ [0, {}]; wrote {}",
        record.p1,
        record.p2,
        record.max_abs_diff,
        record.t_final,
        out.display()
    );
    Ok(())
}
