use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qca_core::criticality::{Method, Window};
use qca_core::lindblad::RateConvention;

use crate::commands::analyze::AnalyzeInputs;
use crate::commands::plot::PlotKind;
use crate::commands::{analyze, evolve, lindblad, meanfield, plot, scan};
use crate::config::{
    self, parse_method, parse_window, AnalyzeConfig, Backend, DenseMethod, EvolveConfig, Grid,
    InitialSpec, LindbladCompareConfig, MeanfieldConfig, Restriction, ScanConfig, SimConfig,
};
use crate::error::{CliError, CliResult};

/// Simulate dissipative (1+1)D quantum cellular automata and estimate their critical behaviour.
#[derive(Debug, Parser)]
#[command(name = "qca-critic", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one row from a product state and write its density series.
    Evolve(EvolveArgs),
    /// Evolve every point of a (p1, p2) grid in parallel.
    Scan(ScanArgs),
    /// Mean-field phase diagram, critical line and order boundary.
    Meanfield(MeanfieldArgs),
    /// Compare small-step QCA dynamics with the continuous-time master equation.
    LindbladCompare(LindbladArgs),
    /// Estimate critical points and exponents from a scan tree.
    Analyze(AnalyzeArgs),
    /// Render SVG plots from phase diagrams or density series.
    Plot(PlotArgs),
}

/// Flags override values from `--config`.
#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Number of sites in a row.
    #[arg(long = "L")]
    l: Option<usize>,
    /// MPS bond cap.
    #[arg(long)]
    chi: Option<usize>,
    /// Relative singular-value cutoff.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Number of steps.
    #[arg(long = "T")]
    t: Option<usize>,
    /// full, vacuum or mixed; per-site Bloch vectors go in the config file.
    #[arg(long, value_parser = InitialSpec::parse_flag)]
    initial: Option<InitialSpec>,
    #[arg(long, value_enum)]
    dense_method: Option<DenseMethod>,
    /// Record per-site densities.
    #[arg(long)]
    per_site: bool,
    /// Record mean ⟨σˣ⟩ and ⟨σʸ⟩.
    #[arg(long)]
    transverse: bool,
}

impl SimArgs {
    fn apply(&self, sim: &mut SimConfig) {
        if let Some(v) = self.backend {
            sim.backend = v;
        }
        if let Some(v) = self.l {
            sim.l = v;
        }
        if let Some(v) = self.chi {
            sim.chi = v;
        }
        if let Some(v) = self.cutoff {
            sim.cutoff = v;
        }
        if let Some(v) = self.t {
            sim.t = v;
        }
        if let Some(v) = &self.initial {
            sim.initial = v.clone();
        }
        if let Some(v) = self.dense_method {
            sim.dense_method = v;
        }
        sim.per_site |= self.per_site;
        sim.transverse |= self.transverse;
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Branching probability.
    #[arg(long)]
    p1: Option<f64>,
    /// Decay probability.
    #[arg(long)]
    p2: Option<f64>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated p1 values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    p1: Option<Vec<f64>>,
    /// Comma-separated p2 values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    p2: Option<Vec<f64>>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, env = "QCA_CRITIC_JOBS")]
    jobs: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct MeanfieldArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated p1 values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    p1: Option<Vec<f64>>,
    /// Evenly spaced p2 samples on [0, 1].
    #[arg(long)]
    p2_samples: Option<usize>,
    /// Iteration budget per grid point.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stop once a step moves less than this.
    #[arg(long)]
    tol: Option<f64>,
    /// Order-classifier threshold at 2001 p2 samples.
    #[arg(long)]
    threshold: Option<f64>,
    /// Skip the SVG figure.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Args)]
pub struct LindbladArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of sites in a row.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Coherent rate Ω in units of γ.
    #[arg(long)]
    omega_over_gamma: Option<f64>,
    /// Step size γδt.
    #[arg(long)]
    gamma_dt: Option<f64>,
    /// Explicit probabilities; requires --p2 as well.
    #[arg(long, requires = "p2")]
    p1: Option<f64>,
    #[arg(long, requires = "p1")]
    p2: Option<f64>,
    /// End time in units of 1/γ.
    #[arg(long)]
    t_final: Option<f64>,
    /// theta-sq-eq-gamma-dt or theta-sq-eq-half-gamma-dt.
    #[arg(long, value_parser = |s: &str| s.parse::<RateConvention>().map_err(|e| e.to_string()))]
    rate_convention: Option<RateConvention>,
    /// Comma-separated γδt values for a discrepancy table.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    halving: Option<Vec<f64>>,
    /// Skip the SVG figure.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Scan output directory.
    input: PathBuf,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// r2-fit, flat-alpha or both.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Log-log fit window LO,HI.
    #[arg(long, value_parser = parse_window)]
    fit_window: Option<Window>,
    /// Averaging window LO,HI on the later time 2t.
    #[arg(long, value_parser = parse_window)]
    avg_window: Option<Window>,
    /// Keep windows as given when T differs from 100.
    #[arg(long)]
    no_rescale: bool,
    /// P1:P2_ABOVE; flat-alpha only considers p2 above the bound at that p1.
    #[arg(long)]
    restrict: Vec<Restriction>,
    /// Scan tree at half the system size.
    #[arg(long)]
    half_l: Option<PathBuf>,
    /// Scan tree at half the bond dimension.
    #[arg(long)]
    half_chi: Option<PathBuf>,
    /// Skip the SVG figure.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Phase-diagram JSON, or series CSVs.
    inputs: Vec<PathBuf>,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
    /// Plot title.
    #[arg(long)]
    title: Option<String>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Evolve(a) => {
            let mut c: EvolveConfig = config::load(a.config.as_deref())?;
            c.p1 = a.p1.or(c.p1);
            c.p2 = a.p2.or(c.p2);
            a.sim.apply(&mut c.sim);
            evolve::run(&c, &a.out)
        }
        Command::Scan(a) => {
            let mut c: ScanConfig = config::load(a.config.as_deref())?;
            if let Some(v) = a.p1 {
                c.p1_grid = Grid::Values(v);
            }
            if let Some(v) = a.p2 {
                c.p2_grid = Grid::Values(v);
            }
            a.sim.apply(&mut c.sim);
            scan::run(&c, &a.out, a.jobs.unwrap_or_else(scan::default_jobs))
        }
        Command::Meanfield(a) => {
            let mut c: MeanfieldConfig = config::load(a.config.as_deref())?;
            if let Some(v) = a.p1 {
                c.p1_grid = Grid::Values(v);
            }
            if let Some(n) = a.p2_samples {
                c.p2_grid = Grid::Range {
                    start: 0.0,
                    stop: 1.0,
                    num: n,
                };
            }
            c.max_iter = a.max_iter.unwrap_or(c.max_iter);
            c.tol = a.tol.unwrap_or(c.tol);
            c.gradient_threshold = a.threshold.unwrap_or(c.gradient_threshold);
            c.svg &= !a.no_svg;
            meanfield::run(&c, &a.out)
        }
        Command::LindbladCompare(a) => {
            let mut c: LindbladCompareConfig = config::load(a.config.as_deref())?;
            c.l = a.l.unwrap_or(c.l);
            c.omega_over_gamma = a.omega_over_gamma.unwrap_or(c.omega_over_gamma);
            c.gamma_dt = a.gamma_dt.unwrap_or(c.gamma_dt);
            if let (Some(p1), Some(p2)) = (a.p1, a.p2) {
                c.probabilities = Some([p1, p2]);
            }
            if a.omega_over_gamma.is_some() || a.gamma_dt.is_some() {
                if a.p1.is_some() {
                    return Err(CliError::Validation(
                        "give either --p1/--p2 or --omega-over-gamma/--gamma-dt".into(),
                    ));
                }
                c.probabilities = None;
            }
            c.t_final = a.t_final.unwrap_or(c.t_final);
            c.rate_convention = a.rate_convention.unwrap_or(c.rate_convention);
            if let Some(v) = a.halving {
                c.halving = v;
            }
            c.svg &= !a.no_svg;
            lindblad::run(&c, &a.out)
        }
        Command::Analyze(a) => {
            let mut c: AnalyzeConfig = config::load(a.config.as_deref())?;
            c.method = a.method.unwrap_or(c.method);
            c.fit_window = a.fit_window.unwrap_or(c.fit_window);
            c.avg_window = a.avg_window.unwrap_or(c.avg_window);
            c.rescale_windows &= !a.no_rescale;
            if !a.restrict.is_empty() {
                c.restrictions = a.restrict;
            }
            c.svg &= !a.no_svg;
            let inputs = AnalyzeInputs {
                input: a.input,
                half_l: a.half_l,
                half_chi: a.half_chi,
            };
            analyze::run(&c, &inputs, &a.out)
        }
        Command::Plot(a) => plot::run(a.kind, &a.inputs, &a.out, a.title.as_deref()),
    }
}
