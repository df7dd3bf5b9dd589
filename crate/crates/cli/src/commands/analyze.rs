use std::path::{Path, PathBuf};

use qca_core::criticality::{
    analyze_family, effective_exponent, write_estimates_csv, Companions, FamilyAnalysis, Provenance, SeriesFamily,
    ALPHA_DP, ALPHA_QCP,
};
use qca_core::{QcaError, TimeSeries};
use serde::{Deserialize, Serialize};

use super::evolve::SERIES_FILE;
use super::scan::PointStatus;
use crate::config::AnalyzeConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{create_dir, read_json, timestamp, write_bytes, write_json, Manifest, MANIFEST_FILE};
use crate::svg::{Line, LinePlot, Reference};

/// The parts of a scan manifest analysis relies on; other keys are ignored.
#[derive(Debug, Deserialize)]
struct TreeIndex {
    #[serde(default)]
    config: Option<serde_json::Value>,
    entries: Vec<TreeEntry>,
}

#[derive(Debug, Deserialize)]
struct TreeEntry {
    p1: f64,
    p2: f64,
    path: String,
    #[serde(default = "ok_status")]
    status: PointStatus,
}

fn ok_status() -> PointStatus {
    PointStatus::Ok
}

fn provenance(config: Option<&serde_json::Value>) -> Provenance {
    let sim = config.and_then(|c| c.get("sim"));
    let field = |k: &str| sim.and_then(|s| s.get(k));
    let backend = field("backend").and_then(|v| v.as_str()).unwrap_or("unknown").to_string();
    let chi = (backend == "mps").then(|| field("chi").and_then(|v| v.as_u64())).flatten();
    Provenance {
        backend,
        l: field("L").and_then(|v| v.as_u64()).unwrap_or(0) as usize,
        chi: chi.map(|c| c as usize),
    }
}

/// Families of a scan tree, ordered by `p1`; failed points are skipped.
pub fn read_tree(root: &Path) -> CliResult<Vec<SeriesFamily>> {
    let index: TreeIndex = read_json(&root.join(MANIFEST_FILE))?;
    let prov = provenance(index.config.as_ref());
    let mut groups: Vec<(f64, Vec<(f64, TimeSeries)>)> = Vec::new();
    for e in index.entries.iter().filter(|e| e.status == PointStatus::Ok) {
        let path = root.join(&e.path).join(SERIES_FILE);
        let file = std::fs::File::open(&path).map_err(|err| CliError::io(&path, err))?;
        let series = TimeSeries::read_csv(file).map_err(|err| CliError::at(&path, err))?;
        match groups.iter_mut().find(|(p1, _)| *p1 == e.p1) {
            Some((_, v)) => v.push((e.p2, series)),
            None => groups.push((e.p1, vec![(e.p2, series)])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups
        .into_iter()
        .map(|(p1, mut entries)| {
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            SeriesFamily::new(p1, entries, prov.clone()).map_err(|e| CliError::at(root, e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFailure {
    pub p1: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub families: Vec<FamilyAnalysis>,
    pub failures: Vec<FamilyFailure>,
}

/// Input trees recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeInputs {
    pub input: PathBuf,
    pub half_l: Option<PathBuf>,
    pub half_chi: Option<PathBuf>,
}

pub fn exponent_svg(family: &SeriesFamily, analysis: Option<&FamilyAnalysis>) -> String {
    let selected: Vec<f64> = analysis
        .map(|a| [&a.r2, &a.flat_alpha].into_iter().flatten().map(|e| e.p2_crit).collect())
        .unwrap_or_default();
    let lines = family
        .entries
        .iter()
        .map(|(p2, s)| Line {
            label: format!("p2={p2}{}", if selected.contains(p2) { " *" } else { "" }),
            points: effective_exponent(s).points.iter().map(|&(t, a)| (t as f64, a)).collect(),
            dashed: !selected.contains(p2),
        })
        .collect();
    LinePlot {
        title: format!("Effective exponent, p1 = {}", family.p1),
        x_label: "t".into(),
        y_label: "α(t) = -log2[n(2t)/n(t)]".into(),
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
    .render()
}

fn companion(families: &[SeriesFamily], p1: f64) -> Option<&SeriesFamily> {
    families.iter().find(|f| f.p1 == p1)
}

pub fn run(config: &AnalyzeConfig, inputs: &AnalyzeInputs, out: &Path) -> CliResult<()> {
    config.validate()?;
    let families = read_tree(&inputs.input)?;
    let half_l = inputs.half_l.as_deref().map(read_tree).transpose()?.unwrap_or_default();
    let half_chi = inputs.half_chi.as_deref().map(read_tree).transpose()?.unwrap_or_default();
    let mut report = AnalyzeReport {
        families: Vec::new(),
        failures: Vec::new(),
    };
    create_dir(out)?;
    let mut outputs = vec!["estimates.json".to_string(), "estimates.csv".to_string()];
    for family in &families {
        let companions = Companions {
            half_l: companion(&half_l, family.p1),
            half_chi: companion(&half_chi, family.p1),
        };
        let result = analyze_family(family, config.method, &config.analysis(family.p1), companions);
        if config.svg {
            let name = format!("alpha_p1={}.svg", family.p1);
            write_bytes(&out.join(&name), exponent_svg(family, result.as_ref().ok()).as_bytes())?;
            outputs.push(name);
        }
        match result {
            Ok(a) => report.families.push(a),
            Err(e) => report.failures.push(FamilyFailure {
                p1: family.p1,
                error: e.to_string(),
            }),
        }
    }
    write_json(&out.join("estimates.json"), &report)?;
    let estimates: Vec<_> = report
        .families
        .iter()
        .flat_map(|a| [a.r2, a.flat_alpha, a.averaged])
        .flatten()
        .collect();
    let csv_path = out.join("estimates.csv");
    let mut buf = Vec::new();
    write_estimates_csv(&estimates, &mut buf).map_err(|e| CliError::at(&csv_path, e))?;
    write_bytes(&csv_path, &buf)?;
    let mut manifest = Manifest::new("analyze", timestamp()?, config, outputs);
    manifest.inputs = [Some(&inputs.input), inputs.half_l.as_ref(), inputs.half_chi.as_ref()]
        .into_iter()
        .flatten()
        .map(|p| p.display().to_string())
        .collect();
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    for e in &estimates {
        println!(
            "p1 = {:<6} {:<10} p2_crit = {:.4} ± {:.4}  α = {:.4} ± {:.4}",
            e.p1,
            e.method.name(),
            e.p2_crit,
            e.p2_err,
            e.alpha,
            e.alpha_err
        );
    }
    println!("wrote {}", out.display());
    if let Some(f) = report.failures.first() {
        return Err(CliError::Core(QcaError::Estimation(format!(
            "{} of {} families failed (first at p1 = {}: {})",
            report.failures.len(),
            families.len(),
            f.p1,
            f.error
        ))));
    }
    Ok(())
}
