//! Critical points and decay exponents from families of density series.
//!
//! Two selectors locate the critical slice of a fixed-`p1` family: the best
//! log-log linear fit ([`critical_by_r2`]) and the flattest effective exponent
//! ([`critical_by_flat_alpha`]). The exponent is the window mean of
//! `α(t) = -log₂[n(2t)/n(t)]`.
//!
//! Windows on `α` bound the later time `2t` of each pair, so `[80, 100]` on a
//! `T = 100` run averages `α(40..=50)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, QcaError, Result};
use crate::series::{fmt_f64, TimeSeries};

/// Reference value with its quoted uncertainty; annotation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceExponent {
    pub name: &'static str,
    pub value: f64,
    pub err: f64,
}

pub const ALPHA_DP: ReferenceExponent = ReferenceExponent {
    name: "DP",
    value: 0.159464,
    err: 0.000006,
};
pub const ALPHA_QCP: ReferenceExponent = ReferenceExponent {
    name: "QCP",
    value: 0.32,
    err: 0.01,
};
/// Second published estimate for the quantum contact process.
pub const ALPHA_QCP_ALT: ReferenceExponent = ReferenceExponent {
    name: "QCP",
    value: 0.36,
    err: 0.08,
};

/// Horizon the default windows refer to.
pub const REFERENCE_T_MAX: usize = 100;
pub const DEFAULT_FIT_WINDOW: Window = Window { lo: 10, hi: 100 };
pub const DEFAULT_AVG_WINDOW: Window = Window { lo: 80, hi: 100 };

/// Closed time interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(QcaError::Domain {
                field: "window",
                value: lo as f64,
                reason: "lower end exceeds upper end",
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.lo..=self.hi).contains(&t)
    }

    /// Scale both ends by `t_max / REFERENCE_T_MAX`, rounding to the nearest step.
    pub fn rescaled(&self, t_max: usize) -> WindowRescale {
        let scale = |v: usize| ((v * t_max) as f64 / REFERENCE_T_MAX as f64).round() as usize;
        let applied = if t_max == REFERENCE_T_MAX {
            *self
        } else {
            Window {
                lo: scale(self.lo),
                hi: scale(self.hi),
            }
        };
        WindowRescale {
            requested: *self,
            applied,
            reference_t_max: REFERENCE_T_MAX,
            t_max,
        }
    }
}

/// Record of a window adapted to a shorter or longer horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRescale {
    pub requested: Window,
    pub applied: Window,
    pub reference_t_max: usize,
    pub t_max: usize,
}

impl WindowRescale {
    pub fn is_rescaled(&self) -> bool {
        self.requested != self.applied
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveExponent {
    /// `(t, α(t))` for every `t ≥ 1` with `2t ≤ T` and both densities positive.
    pub points: Vec<(usize, f64)>,
    /// Steps skipped because a needed density was zero, negative or missing.
    pub omitted: Vec<usize>,
}

impl EffectiveExponent {
    /// Samples whose later time `2t` lies in `window`.
    pub fn in_window(&self, window: Window) -> Vec<(usize, f64)> {
        self.points.iter().copied().filter(|&(t, _)| window.contains(2 * t)).collect()
    }
}

pub fn effective_exponent(series: &TimeSeries) -> EffectiveExponent {
    let t_max = series.t_max();
    let mut out = EffectiveExponent {
        points: Vec::new(),
        omitted: Vec::new(),
    };
    for t in 1..=t_max / 2 {
        match (series.density_at(t), series.density_at(2 * t)) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => {
                out.points.push((t, -(b / a).log2()))
            }
            _ => out.omitted.push(t),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Zero for a constant response.
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln n` against `ln t` over `t ∈ window`, `t ≥ 1`, `n > 0`.
pub fn loglog_fit(series: &TimeSeries, window: Window) -> Result<LogLogFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&series.n_mean)
        .filter(|&(&t, &n)| t >= 1 && window.contains(t) && n > 0.0 && n.is_finite())
        .map(|(&t, &n)| ((t as f64).ln(), n.ln()))
        .unzip();
    let m = xs.len();
    if m < 3 {
        return Err(QcaError::Estimation(format!(
            "log-log fit needs 3 positive points in [{}, {}], found {m}",
            window.lo, window.hi
        )));
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // relative guard: a flat series leaves only rounding noise in syy
    let r2 = if syy <= 1e-24 * ys.iter().map(|y| y * y).sum::<f64>().max(1e-300) {
        0.0
    } else {
        let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        points: m,
    })
}

/// Mean of `α(t)` over samples whose later time lies in `window`.
pub fn estimate_alpha(series: &TimeSeries, window: Window) -> Result<f64> {
    let samples = effective_exponent(series).in_window(window);
    if samples.is_empty() {
        return Err(QcaError::Estimation(format!(
            "no effective-exponent samples with 2t in [{}, {}]",
            window.lo, window.hi
        )));
    }
    Ok(samples.iter().map(|(_, a)| a).sum::<f64>() / samples.len() as f64)
}

/// Flatness score: mean |first difference| of the mean-shifted `α` samples.
pub fn flatness_score(alpha: &[f64]) -> Option<f64> {
    if alpha.len() < 2 {
        return None;
    }
    let mean = alpha.iter().sum::<f64>() / alpha.len() as f64;
    let shifted: Vec<f64> = alpha.iter().map(|a| a - mean).collect();
    Some(shifted.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (shifted.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: String,
    pub l: usize,
    pub chi: Option<usize>,
}

/// Density series at fixed `p1` over increasing `p2`, sharing one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFamily {
    pub p1: f64,
    pub entries: Vec<(f64, TimeSeries)>,
    pub provenance: Provenance,
}

impl SeriesFamily {
    pub fn new(p1: f64, entries: Vec<(f64, TimeSeries)>, provenance: Provenance) -> Result<Self> {
        check_probability("p1", p1)?;
        for (p2, _) in &entries {
            check_probability("p2", *p2)?;
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(QcaError::Domain {
                field: "p2",
                value: f64::NAN,
                reason: "family p2 values must be strictly increasing",
            });
        }
        if let Some((_, first)) = entries.first() {
            let t = first.t_max();
            if let Some((p2, _)) = entries.iter().find(|(_, s)| s.t_max() != t) {
                return Err(QcaError::Shape {
                    expected: format!("T = {t} for every slice"),
                    got: format!("different T at p2 = {p2}"),
                });
            }
        }
        Ok(Self {
            p1,
            entries,
            provenance,
        })
    }

    pub fn p2_values(&self) -> Vec<f64> {
        self.entries.iter().map(|(p2, _)| *p2).collect()
    }

    pub fn t_max(&self) -> usize {
        self.entries.first().map_or(0, |(_, s)| s.t_max())
    }

    pub fn index_of(&self, p2: f64) -> Option<usize> {
        self.entries.iter().position(|(v, _)| *v == p2)
    }

    pub fn slice(&self, p2: f64) -> Option<&TimeSeries> {
        self.index_of(p2).map(|i| &self.entries[i].1)
    }

    /// Largest distance from entry `i` to its grid neighbours.
    pub fn grid_err(&self, i: usize) -> f64 {
        let p = self.entries[i].0;
        let below = i.checked_sub(1).map(|j| p - self.entries[j].0);
        let above = self.entries.get(i + 1).map(|(q, _)| q - p);
        below.into_iter().chain(above).fold(0.0, f64::max)
    }
}

/// Outcome of a critical-slice selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSelection {
    pub p2_crit: f64,
    pub grid_err: f64,
    /// Per-slice score in family order; `None` where the slice was unusable or excluded.
    pub scores: Vec<Option<f64>>,
}

fn require_slices(family: &SeriesFamily) -> Result<()> {
    if family.entries.len() < 2 {
        return Err(QcaError::Estimation(format!(
            "critical-point selection needs at least 2 slices, family at p1 = {} has {}",
            family.p1,
            family.entries.len()
        )));
    }
    Ok(())
}

fn select(family: &SeriesFamily, scores: Vec<Option<f64>>, better: impl Fn(f64, f64) -> bool) -> Option<SliceSelection> {
    // first slice wins ties
    let best = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, b)) if !better(v, b) => acc,
            _ => Some((i, v)),
        })?;
    Some(SliceSelection {
        p2_crit: family.entries[best.0].0,
        grid_err: family.grid_err(best.0),
        scores,
    })
}

/// Slice with the largest log-log `R²` over `window`.
pub fn critical_by_r2(family: &SeriesFamily, window: Window) -> Result<SliceSelection> {
    require_slices(family)?;
    let scores = family
        .entries
        .iter()
        .map(|(_, s)| loglog_fit(s, window).ok().map(|f| f.r2))
        .collect();
    select(family, scores, |a, b| a > b)
        .ok_or_else(|| QcaError::Estimation(format!("no slice at p1 = {} admits a log-log fit", family.p1)))
}

/// Slice whose mean-shifted `α(t)` is flattest over `window`, skipping `p2 ≤ restrict`.
pub fn critical_by_flat_alpha(family: &SeriesFamily, window: Window, restrict: Option<f64>) -> Result<SliceSelection> {
    require_slices(family)?;
    let scores = family
        .entries
        .iter()
        .map(|(p2, s)| {
            if restrict.is_some_and(|r| *p2 <= r) {
                return None;
            }
            let alpha: Vec<f64> = effective_exponent(s).in_window(window).iter().map(|(_, a)| *a).collect();
            flatness_score(&alpha)
        })
        .collect();
    select(family, scores, |a, b| a < b).ok_or_else(|| {
        QcaError::Estimation(format!(
            "effective-exponent window [{}, {}] is empty for every slice at p1 = {}",
            window.lo, window.hi, family.p1
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponents {
    /// `|α - α(L/2)|`; `None` when no half-size run was supplied.
    pub finite_size: Option<f64>,
    /// `|α - α(χ/2)|`; `None` when no half-bond run was supplied.
    pub finite_chi: Option<f64>,
    /// Largest `|α - α(neighbour)|` over the available grid neighbours.
    pub grid: f64,
}

impl ErrorComponents {
    fn present(&self) -> impl Iterator<Item = f64> {
        [self.finite_size, self.finite_chi, Some(self.grid)].into_iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub combined: f64,
    pub components: ErrorComponents,
    /// Set when `α = 0` forced an absolute instead of fractional combination.
    pub absolute_fallback: bool,
}

/// Root sum of squares of fractional deviations, scaled back by `|α|`.
pub fn error_budget(
    alpha_ref: f64,
    alpha_half_l: Option<f64>,
    alpha_half_chi: Option<f64>,
    alpha_neighbor_above: Option<f64>,
    alpha_neighbor_below: Option<f64>,
) -> Result<ErrorBudget> {
    let inputs = [Some(alpha_ref), alpha_half_l, alpha_half_chi, alpha_neighbor_above, alpha_neighbor_below];
    if let Some(bad) = inputs.iter().flatten().find(|v| !v.is_finite()) {
        return Err(QcaError::Domain {
            field: "alpha",
            value: *bad,
            reason: "must be finite",
        });
    }
    let dev = |v: Option<f64>| v.map(|a| (alpha_ref - a).abs());
    let grid = match (dev(alpha_neighbor_above), dev(alpha_neighbor_below)) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(QcaError::Estimation("grid error needs at least one neighbouring slice".into()));
        }
    };
    let components = ErrorComponents {
        finite_size: dev(alpha_half_l),
        finite_chi: dev(alpha_half_chi),
        grid,
    };
    let absolute_fallback = alpha_ref == 0.0;
    let combined = if absolute_fallback {
        components.present().map(|c| c * c).sum::<f64>().sqrt()
    } else {
        let a = alpha_ref.abs();
        a * components.present().map(|c| (c / a).powi(2)).sum::<f64>().sqrt()
    };
    Ok(ErrorBudget {
        combined,
        components,
        absolute_fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    R2Fit,
    FlatAlpha,
    Averaged,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::R2Fit => "r2-fit",
            Method::FlatAlpha => "flat-alpha",
            Method::Averaged => "averaged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub p1: f64,
    pub p2_crit: f64,
    pub p2_err: f64,
    pub alpha: f64,
    pub alpha_err: f64,
    pub method: Method,
    pub components: ErrorComponents,
}

fn rss(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Arithmetic mean of the two estimates; every error combined in quadrature.
pub fn combine_methods(est_r2: &CriticalEstimate, est_flat: &CriticalEstimate) -> Result<CriticalEstimate> {
    if est_r2.p1 != est_flat.p1 {
        return Err(QcaError::Domain {
            field: "p1",
            value: est_flat.p1,
            reason: "estimates refer to different p1",
        });
    }
    let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(rss(x, y)),
        (x, y) => x.or(y),
    };
    Ok(CriticalEstimate {
        p1: est_r2.p1,
        p2_crit: 0.5 * (est_r2.p2_crit + est_flat.p2_crit),
        p2_err: rss(est_r2.p2_err, est_flat.p2_err),
        alpha: 0.5 * (est_r2.alpha + est_flat.alpha),
        alpha_err: rss(est_r2.alpha_err, est_flat.alpha_err),
        method: Method::Averaged,
        components: ErrorComponents {
            finite_size: opt(est_r2.components.finite_size, est_flat.components.finite_size),
            finite_chi: opt(est_r2.components.finite_chi, est_flat.components.finite_chi),
            grid: rss(est_r2.components.grid, est_flat.components.grid),
        },
    })
}

/// Window and restriction settings for [`analyze_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub fit_window: Window,
    pub avg_window: Window,
    /// Flat-alpha selector only considers `p2` above this.
    pub restrict_p2_above: Option<f64>,
    /// Scale windows to the family horizon when it differs from the reference.
    pub rescale_windows: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit_window: DEFAULT_FIT_WINDOW,
            avg_window: DEFAULT_AVG_WINDOW,
            restrict_p2_above: None,
            rescale_windows: true,
        }
    }
}

/// Companion runs at half the system size and half the bond dimension.
#[derive(Debug, Clone, Copy, Default)]
pub struct Companions<'a> {
    pub half_l: Option<&'a SeriesFamily>,
    pub half_chi: Option<&'a SeriesFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAnalysis {
    pub p1: f64,
    pub fit_window: WindowRescale,
    pub avg_window: WindowRescale,
    pub r2: Option<CriticalEstimate>,
    pub flat_alpha: Option<CriticalEstimate>,
    pub averaged: Option<CriticalEstimate>,
    pub r2_selection: Option<SliceSelection>,
    pub flat_alpha_selection: Option<SliceSelection>,
}

fn companion_alpha(companion: Option<&SeriesFamily>, p2: f64, window: Window) -> Result<Option<f64>> {
    match companion.and_then(|f| f.slice(p2)) {
        Some(s) => estimate_alpha(s, window).map(Some),
        None => Ok(None),
    }
}

fn estimate_from(
    family: &SeriesFamily,
    selection: &SliceSelection,
    method: Method,
    window: Window,
    companions: Companions<'_>,
) -> Result<CriticalEstimate> {
    let i = family.index_of(selection.p2_crit).expect("selected slice belongs to the family");
    let alpha = estimate_alpha(&family.entries[i].1, window)?;
    let neighbor = |j: Option<usize>| -> Option<f64> {
        j.and_then(|j| family.entries.get(j)).and_then(|(_, s)| estimate_alpha(s, window).ok())
    };
    let budget = error_budget(
        alpha,
        companion_alpha(companions.half_l, selection.p2_crit, window)?,
        companion_alpha(companions.half_chi, selection.p2_crit, window)?,
        neighbor(Some(i + 1)),
        neighbor(i.checked_sub(1)),
    )?;
    Ok(CriticalEstimate {
        p1: family.p1,
        p2_crit: selection.p2_crit,
        p2_err: selection.grid_err,
        alpha,
        alpha_err: budget.combined,
        method,
        components: budget.components,
    })
}

/// Run the requested selectors on one family; `Averaged` runs both and combines.
pub fn analyze_family(
    family: &SeriesFamily,
    method: Method,
    config: &AnalysisConfig,
    companions: Companions<'_>,
) -> Result<FamilyAnalysis> {
    let t_max = family.t_max();
    let rescale = |w: Window| {
        if config.rescale_windows {
            w.rescaled(t_max)
        } else {
            WindowRescale {
                requested: w,
                applied: w,
                reference_t_max: REFERENCE_T_MAX,
                t_max,
            }
        }
    };
    let (fit_window, avg_window) = (rescale(config.fit_window), rescale(config.avg_window));
    let mut out = FamilyAnalysis {
        p1: family.p1,
        fit_window,
        avg_window,
        r2: None,
        flat_alpha: None,
        averaged: None,
        r2_selection: None,
        flat_alpha_selection: None,
    };
    if matches!(method, Method::R2Fit | Method::Averaged) {
        let sel = critical_by_r2(family, fit_window.applied)?;
        out.r2 = Some(estimate_from(family, &sel, Method::R2Fit, avg_window.applied, companions)?);
        out.r2_selection = Some(sel);
    }
    if matches!(method, Method::FlatAlpha | Method::Averaged) {
        let sel = critical_by_flat_alpha(family, avg_window.applied, config.restrict_p2_above)?;
        out.flat_alpha = Some(estimate_from(family, &sel, Method::FlatAlpha, avg_window.applied, companions)?);
        out.flat_alpha_selection = Some(sel);
    }
    if let (Some(a), Some(b)) = (&out.r2, &out.flat_alpha) {
        if method == Method::Averaged {
            out.averaged = Some(combine_methods(a, b)?);
        }
    }
    Ok(out)
}

/// CSV with header `p1,p2_crit,p2_err,alpha,alpha_err,method`.
pub fn write_estimates_csv<W: Write>(estimates: &[CriticalEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p1", "p2_crit", "p2_err", "alpha", "alpha_err", "method"])?;
    for e in estimates {
        w.write_record([
            fmt_f64(e.p1),
            fmt_f64(e.p2_crit),
            fmt_f64(e.p2_err),
            fmt_f64(e.alpha),
            fmt_f64(e.alpha_err),
            e.method.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
