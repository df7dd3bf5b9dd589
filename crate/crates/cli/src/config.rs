//! Run configurations: JSON files with unknown keys rejected, overridden by flags.

use std::path::Path;

use qca_core::criticality::{AnalysisConfig, Method, Window, DEFAULT_AVG_WINDOW, DEFAULT_FIT_WINDOW};
use qca_core::dense::{DenseBackend, InitialKind, MAX_DENSE_SITES};
use qca_core::lindblad::RateConvention;
use qca_core::meanfield::{linspace, DEFAULT_GRADIENT_THRESHOLD, DEFAULT_MAX_ITER, DEFAULT_TOL};
use qca_core::mps::DEFAULT_CUTOFF;
use qca_core::{ObservableSet, QcaError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DESK_SITES: usize = 20;
pub const DESK_CHI: usize = 32;
pub const DESK_STEPS: usize = 100;

/// Read a config file, or start from defaults when none is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_probability(name: &str, v: f64) -> CliResult<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{name} = {v} is not a probability")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Dense,
    Mps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DenseMethod {
    #[default]
    Kraus,
    Ancilla,
}

impl From<DenseMethod> for DenseBackend {
    fn from(m: DenseMethod) -> Self {
        match m {
            DenseMethod::Kraus => DenseBackend::Kraus,
            DenseMethod::Ancilla => DenseBackend::Ancilla,
        }
    }
}

/// Initial row: a named product state or one Bloch triple `(x, y, z)` per site.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSpec {
    #[default]
    Full,
    Vacuum,
    Mixed,
    Product(Vec<[f64; 3]>),
}

impl InitialSpec {
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        match s {
            "full" | "fully-occupied" => Ok(InitialSpec::Full),
            "vacuum" | "empty" => Ok(InitialSpec::Vacuum),
            "mixed" => Ok(InitialSpec::Mixed),
            other => Err(format!("unknown initial state `{other}` (full, vacuum, mixed)")),
        }
    }

    pub fn kind(&self) -> InitialKind {
        match self {
            InitialSpec::Full => InitialKind::FullyOccupied,
            InitialSpec::Vacuum => InitialKind::Vacuum,
            InitialSpec::Mixed => InitialKind::MaximallyMixed,
            InitialSpec::Product(v) => InitialKind::Product(v.clone()),
        }
    }
}

/// Settings shared by single runs and scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub backend: Backend,
    #[serde(rename = "L")]
    pub l: usize,
    /// Bond cap; MPS only.
    pub chi: usize,
    /// Relative singular-value cutoff; MPS only.
    pub cutoff: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub initial: InitialSpec,
    /// Dense only.
    pub dense_method: DenseMethod,
    pub per_site: bool,
    pub transverse: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Mps,
            l: DESK_SITES,
            chi: DESK_CHI,
            cutoff: DEFAULT_CUTOFF,
            t: DESK_STEPS,
            initial: InitialSpec::Full,
            dense_method: DenseMethod::Kraus,
            per_site: false,
            transverse: false,
        }
    }
}

impl SimConfig {
    pub fn observables(&self) -> ObservableSet {
        ObservableSet {
            per_site: self.per_site,
            transverse: self.transverse,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.l < 2 {
            return Err(invalid(format!("L = {} (at least 2 sites)", self.l)));
        }
        if self.backend == Backend::Dense && self.l > MAX_DENSE_SITES {
            return Err(CliError::Core(QcaError::Capacity {
                what: "dense sites",
                requested: self.l,
                max: MAX_DENSE_SITES,
            }));
        }
        if self.backend == Backend::Mps && self.chi == 0 {
            return Err(invalid("chi must be at least 1"));
        }
        if !(self.cutoff >= 0.0 && self.cutoff < 1.0) {
            return Err(invalid(format!("cutoff = {} (must lie in [0, 1))", self.cutoff)));
        }
        self.initial.kind().bloch_triples(self.l)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub sim: SimConfig,
}

impl EvolveConfig {
    pub fn probabilities(&self) -> CliResult<(f64, f64)> {
        let p1 = self.p1.ok_or_else(|| invalid("p1 is required"))?;
        let p2 = self.p2.ok_or_else(|| invalid("p2 is required"))?;
        check_probability("p1", p1)?;
        check_probability("p2", p2)?;
        Ok((p1, p2))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.probabilities()?;
        self.sim.validate()
    }
}

/// Explicit values, or `num` evenly spaced samples on `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, num: usize },
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Values(Vec::new())
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, num } => linspace(*start, *stop, *num),
        }
    }

    /// Non-empty, strictly increasing probabilities.
    pub fn checked(&self, name: &str) -> CliResult<Vec<f64>> {
        let v = self.values();
        if v.is_empty() {
            return Err(invalid(format!("{name} grid is empty")));
        }
        for x in &v {
            check_probability(name, *x)?;
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(format!("{name} grid must be strictly increasing")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub p1_grid: Grid,
    pub p2_grid: Grid,
    pub sim: SimConfig,
}

impl ScanConfig {
    pub fn grids(&self) -> CliResult<(Vec<f64>, Vec<f64>)> {
        Ok((self.p1_grid.checked("p1")?, self.p2_grid.checked("p2")?))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.grids()?;
        self.sim.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanfieldConfig {
    pub p1_grid: Grid,
    pub p2_grid: Grid,
    pub max_iter: usize,
    pub tol: f64,
    /// Order-classifier threshold at 2001 `p2` samples.
    pub gradient_threshold: f64,
    pub svg: bool,
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        Self {
            p1_grid: Grid::Range {
                start: 0.0,
                stop: 1.0,
                num: 51,
            },
            p2_grid: Grid::Range {
                start: 0.0,
                stop: 1.0,
                num: 2001,
            },
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            gradient_threshold: DEFAULT_GRADIENT_THRESHOLD,
            svg: true,
        }
    }
}

impl MeanfieldConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.p1_grid.checked("p1")?;
        if self.p2_grid.checked("p2")?.len() < 3 {
            return Err(invalid("p2 grid needs at least 3 samples"));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.gradient_threshold > 0.0) {
            return Err(invalid("max_iter, tol and gradient_threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladCompareConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub omega_over_gamma: f64,
    pub gamma_dt: f64,
    /// Explicit `(p1, p2)`; when set, `omega_over_gamma` and `gamma_dt` are derived.
    pub probabilities: Option<[f64; 2]>,
    /// End time in units of `1/γ`.
    pub t_final: f64,
    pub rate_convention: RateConvention,
    /// Extra `γδt` values for a discrepancy table.
    pub halving: Vec<f64>,
    pub svg: bool,
}

impl Default for LindbladCompareConfig {
    fn default() -> Self {
        Self {
            l: 4,
            omega_over_gamma: 5.75,
            gamma_dt: 0.01,
            probabilities: None,
            t_final: 10.0,
            rate_convention: RateConvention::default(),
            halving: Vec::new(),
            svg: true,
        }
    }
}

impl LindbladCompareConfig {
    pub fn validate(&self) -> CliResult<()> {
        if let Some([p1, p2]) = self.probabilities {
            check_probability("p1", p1)?;
            check_probability("p2", p2)?;
        }
        if !(self.t_final > 0.0) || !(self.gamma_dt > 0.0) || !self.omega_over_gamma.is_finite() {
            return Err(invalid("t_final and gamma_dt must be positive, omega_over_gamma finite"));
        }
        if self.halving.iter().any(|g| !(*g > 0.0)) {
            return Err(invalid("halving entries must be positive"));
        }
        Ok(())
    }
}

/// Flat-alpha restriction: at `p1`, only consider `p2 > p2_above`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Restriction {
    pub p1: f64,
    pub p2_above: f64,
}

impl std::str::FromStr for Restriction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or("expected P1:P2_ABOVE")?;
        Ok(Restriction {
            p1: a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?,
            p2_above: b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub method: Method,
    pub fit_window: Window,
    pub avg_window: Window,
    pub rescale_windows: bool,
    pub restrictions: Vec<Restriction>,
    pub svg: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            method: Method::Averaged,
            fit_window: DEFAULT_FIT_WINDOW,
            avg_window: DEFAULT_AVG_WINDOW,
            rescale_windows: true,
            restrictions: Vec::new(),
            svg: true,
        }
    }
}

impl AnalyzeConfig {
    pub fn validate(&self) -> CliResult<()> {
        for w in [self.fit_window, self.avg_window] {
            Window::new(w.lo, w.hi)?;
        }
        Ok(())
    }

    pub fn analysis(&self, p1: f64) -> AnalysisConfig {
        AnalysisConfig {
            fit_window: self.fit_window,
            avg_window: self.avg_window,
            restrict_p2_above: self.restrictions.iter().find(|r| r.p1 == p1).map(|r| r.p2_above),
            rescale_windows: self.rescale_windows,
        }
    }
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "r2-fit" | "r2" => Ok(Method::R2Fit),
        "flat-alpha" => Ok(Method::FlatAlpha),
        "averaged" | "both" => Ok(Method::Averaged),
        other => Err(format!("unknown method `{other}` (r2-fit, flat-alpha, both)")),
    }
}

pub fn parse_window(s: &str) -> Result<Window, String> {
    let (a, b) = s.split_once(',').or_else(|| s.split_once(':')).ok_or("expected LO,HI")?;
    let lo = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    Window::new(lo, hi).map_err(|e| e.to_string())
}
