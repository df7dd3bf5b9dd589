//! Translation-invariant product-state closure of the QCA.
//!
//! Each row is `ρ⁽¹⁾ ⊗ ρ⁽¹⁾ ⊗ ⋯`; one step maps the single-site state through
//! `Tr_controls[G (ρ⁽¹⁾ ⊗ ρ⁽¹⁾ ⊗ |∘⟩⟨∘|) G†]`. The state is carried as
//! `(⟨n⟩, ⟨σˣ⟩, ⟨σʸ⟩)`, which pins the trace to one.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, QcaError, Result};
use crate::gates::{local_gate, GateParams};
use crate::linalg::{c, CMat, C64, ZERO};
use crate::series::fmt_f64;

/// Tolerance of the Bloch-cone check.
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Gradient threshold of the order classifier at the reference grid.
pub const DEFAULT_GRADIENT_THRESHOLD: f64 = 10.0;
/// Reference `p2` spacing of the threshold: 2001 samples on `[0, 1]`.
pub const REFERENCE_P2_SPACING: f64 = 1.0 / 2000.0;
/// Slices whose stationary densities all stay below this count as all-zero.
/// Geometric decay stops at `tol` per step, so residues sit well above `tol`.
pub const ZERO_SLICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub n: f64,
    pub sx: f64,
    pub sy: f64,
}

impl MeanFieldState {
    pub const FULLY_OCCUPIED: Self = Self {
        n: 1.0,
        sx: 0.0,
        sy: 0.0,
    };

    pub fn new(n: f64, sx: f64, sy: f64) -> Result<Self> {
        let s = Self { n, sx, sy };
        s.check()?;
        Ok(s)
    }

    /// Squared Bloch radius `sx² + sy² + (2n-1)²`.
    pub fn bloch_radius_sq(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + (2.0 * self.n - 1.0).powi(2)
    }

    pub fn check(&self) -> Result<()> {
        let r2 = self.bloch_radius_sq();
        if !r2.is_finite() || r2 > 1.0 + FEASIBILITY_TOL {
            return Err(QcaError::Domain {
                field: "mean-field state",
                value: r2,
                reason: "outside the Bloch ball",
            });
        }
        Ok(())
    }

    pub fn density_matrix(&self) -> CMat {
        let off = c(self.sx / 2.0, self.sy / 2.0);
        CMat::from_row_slice(2, 2, &[c(1.0 - self.n, 0.0), off, off.conj(), c(self.n, 0.0)])
    }

    /// Read `(⟨n⟩, ⟨σˣ⟩, ⟨σʸ⟩)` off a 2×2 matrix, ignoring its trace.
    pub fn from_density_matrix(rho: &CMat) -> Self {
        Self {
            n: rho[(1, 1)].re,
            sx: (rho[(0, 1)] + rho[(1, 0)]).re,
            sy: (c(0.0, 1.0) * (rho[(1, 0)] - rho[(0, 1)])).re,
        }
    }

    fn max_diff(&self, other: &Self) -> f64 {
        (self.n - other.n)
            .abs()
            .max((self.sx - other.sx).abs())
            .max((self.sy - other.sy).abs())
    }
}

/// The one-step map at fixed `(p1, p2)` as a linear map from the two-control
/// state `ρ⁽¹⁾ ⊗ ρ⁽¹⁾` (row-major, 16 entries) to the target (row-major, 4).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldMap {
    pub params: GateParams,
    map: [[C64; 16]; 4],
}

impl MeanFieldMap {
    pub fn new(params: GateParams) -> Self {
        let g = local_gate(&params);
        let mut map = [[ZERO; 16]; 4];
        // target enters in |∘⟩, so only even input columns of G contribute
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..4 {
                    for j in 0..4 {
                        map[2 * a + b][4 * i + j] = (0..4)
                            .map(|x| g[(2 * x + a, 2 * i)] * g[(2 * x + b, 2 * j)].conj())
                            .sum();
                    }
                }
            }
        }
        Self { params, map }
    }

    pub fn from_probabilities(p1: f64, p2: f64) -> Result<Self> {
        Ok(Self::new(GateParams::new(p1, p2)?))
    }

    /// One step; the input must lie in the Bloch ball.
    pub fn step(&self, state: &MeanFieldState) -> Result<MeanFieldState> {
        state.check()?;
        Ok(self.step_unchecked(state))
    }

    fn step_unchecked(&self, s: &MeanFieldState) -> MeanFieldState {
        let off = c(s.sx / 2.0, s.sy / 2.0);
        let rho = [c(1.0 - s.n, 0.0), off, off.conj(), c(s.n, 0.0)];
        let mut pair = [ZERO; 16];
        for (i, r) in rho.iter().enumerate() {
            for (j, q) in rho.iter().enumerate() {
                // (ρ ⊗ ρ)[(a1 a2), (b1 b2)] with ρ indices i = 2a1 + b1, j = 2a2 + b2
                let (a1, b1, a2, b2) = (i >> 1, i & 1, j >> 1, j & 1);
                pair[4 * (2 * a1 + a2) + (2 * b1 + b2)] = r * q;
            }
        }
        let out: Vec<C64> = self
            .map
            .iter()
            .map(|row| row.iter().zip(&pair).map(|(m, p)| m * p).sum())
            .collect();
        MeanFieldState {
            n: out[3].re,
            sx: (out[1] + out[2]).re,
            sy: (c(0.0, 1.0) * (out[2] - out[1])).re,
        }
    }

    pub fn stationary(&self, state0: &MeanFieldState, max_iter: usize, tol: f64) -> Result<Stationary> {
        if max_iter == 0 {
            return Err(QcaError::Domain {
                field: "max_iter",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if !(tol > 0.0) {
            return Err(QcaError::Domain {
                field: "tol",
                value: tol,
                reason: "must be positive",
            });
        }
        state0.check()?;
        let mut state = *state0;
        for it in 1..=max_iter {
            let next = self.step_unchecked(&state);
            let delta = next.max_diff(&state);
            state = next;
            if delta < tol {
                return Ok(Stationary {
                    state,
                    converged: true,
                    iterations: it,
                });
            }
        }
        Ok(Stationary {
            state,
            converged: false,
            iterations: max_iter,
        })
    }
}

impl MeanFieldMap {
    /// Newton polish of a fixed point in the `sy = 0` sector, started from `guess`.
    /// A cross-check on iterated results; the Jacobian is a central difference.
    pub fn refine_fixed_point(&self, guess: &MeanFieldState, max_iter: usize, tol: f64) -> Result<Stationary> {
        guess.check()?;
        let residual = |n: f64, sx: f64| {
            let out = self.step_unchecked(&MeanFieldState { n, sx, sy: 0.0 });
            [out.n - n, out.sx - sx]
        };
        let (mut n, mut sx) = (guess.n, guess.sx);
        let h = 1e-7;
        for it in 1..=max_iter {
            let f = residual(n, sx);
            let (fn_p, fn_m) = (residual(n + h, sx), residual(n - h, sx));
            let (fx_p, fx_m) = (residual(n, sx + h), residual(n, sx - h));
            let j = [
                [(fn_p[0] - fn_m[0]) / (2.0 * h), (fx_p[0] - fx_m[0]) / (2.0 * h)],
                [(fn_p[1] - fn_m[1]) / (2.0 * h), (fx_p[1] - fx_m[1]) / (2.0 * h)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                return Err(QcaError::Numerical {
                    site: None,
                    message: "singular Jacobian in fixed-point refinement".into(),
                });
            }
            let dn = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let dsx = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
            n -= dn;
            sx -= dsx;
            if dn.abs().max(dsx.abs()) < tol {
                return Ok(Stationary {
                    state: MeanFieldState { n, sx, sy: 0.0 },
                    converged: true,
                    iterations: it,
                });
            }
        }
        Ok(Stationary {
            state: MeanFieldState { n, sx, sy: 0.0 },
            converged: false,
            iterations: max_iter,
        })
    }
}

/// One mean-field step, contracting the three-site gate.
pub fn mf_step(state: &MeanFieldState, params: &GateParams) -> Result<MeanFieldState> {
    MeanFieldMap::new(*params).step(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationary {
    pub state: MeanFieldState,
    pub converged: bool,
    pub iterations: usize,
}

pub fn mf_stationary(params: &GateParams, state0: &MeanFieldState, max_iter: usize, tol: f64) -> Result<Stationary> {
    MeanFieldMap::new(*params).stationary(state0, max_iter, tol)
}

/// Active-branch stationary density at `p1 = 1`: `max(0, 3/2 + 1/(p2 - 1))`.
pub fn mf_p1_one_closed_form(p2: f64) -> Result<f64> {
    check_probability("p2", p2)?;
    if p2 == 1.0 {
        return Err(QcaError::Domain {
            field: "p2",
            value: p2,
            reason: "closed form is singular at p2 = 1",
        });
    }
    Ok((1.5 + 1.0 / (p2 - 1.0)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

/// Stationary densities over a `p1 × p2` grid from the fully occupied start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub p1_grid: Vec<f64>,
    pub p2_grid: Vec<f64>,
    /// `n_stationary[i][j]` at `(p1_grid[i], p2_grid[j])`.
    pub n_stationary: Vec<Vec<f64>>,
    pub max_iter: usize,
    pub tol: f64,
    /// Grid points that hit `max_iter` before converging.
    pub unconverged: usize,
}

fn check_grid(field: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(QcaError::Domain {
            field,
            value: 0.0,
            reason: "grid must be non-empty",
        });
    }
    for &v in grid {
        check_probability(field, v)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QcaError::Domain {
            field,
            value: f64::NAN,
            reason: "grid must be strictly increasing",
        });
    }
    Ok(())
}

pub fn mf_phase_diagram(p1_grid: &[f64], p2_grid: &[f64], config: RunConfig) -> Result<PhaseDiagram> {
    check_grid("p1_grid", p1_grid)?;
    check_grid("p2_grid", p2_grid)?;
    let points: Vec<(usize, usize)> = (0..p1_grid.len())
        .flat_map(|i| (0..p2_grid.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Stationary> = points
        .par_iter()
        .map(|&(i, j)| {
            MeanFieldMap::from_probabilities(p1_grid[i], p2_grid[j])?.stationary(
                &MeanFieldState::FULLY_OCCUPIED,
                config.max_iter,
                config.tol,
            )
        })
        .collect::<Result<_>>()?;
    let unconverged = results.iter().filter(|r| !r.converged).count();
    let n_stationary = results
        .chunks(p2_grid.len())
        .map(|row| row.iter().map(|r| r.state.n).collect())
        .collect();
    Ok(PhaseDiagram {
        p1_grid: p1_grid.to_vec(),
        p2_grid: p2_grid.to_vec(),
        n_stationary,
        max_iter: config.max_iter,
        tol: config.tol,
        unconverged,
    })
}

impl PhaseDiagram {
    /// CSV with header `p1,p2,n_star`, p1-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p1", "p2", "n_star"])?;
        for (i, p1) in self.p1_grid.iter().enumerate() {
            for (j, p2) in self.p2_grid.iter().enumerate() {
                w.write_record([fmt_f64(*p1), fmt_f64(*p2), fmt_f64(self.n_stationary[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionOrder {
    Continuous,
    Discontinuous,
}

/// Critical-point estimate on one `p1` slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRecord {
    pub p1: f64,
    /// `None` on a degenerate (all-zero) slice.
    pub p2_crit: Option<f64>,
    pub order: Option<TransitionOrder>,
    pub max_abs_gradient: Option<f64>,
    /// Threshold after rescaling to this grid's spacing.
    pub threshold: f64,
    pub degenerate: bool,
}

/// Derivative of `y` on grid `x`: central differences inside, one-sided at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(n >= 2);
    (0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (y[hi] - y[lo]) / (x[hi] - x[lo])
        })
        .collect()
}

/// Threshold rescaled from the 2001-sample reference to the mean spacing of `p2_grid`.
pub fn scaled_threshold(threshold: f64, p2_grid: &[f64]) -> f64 {
    let n = p2_grid.len();
    let spacing = (p2_grid[n - 1] - p2_grid[0]) / (n - 1) as f64;
    threshold * REFERENCE_P2_SPACING / spacing
}

pub fn mf_critical_line(diagram: &PhaseDiagram, gradient_threshold: f64) -> Result<Vec<CriticalRecord>> {
    if diagram.p2_grid.len() < 3 {
        return Err(QcaError::Domain {
            field: "p2_grid",
            value: diagram.p2_grid.len() as f64,
            reason: "at least three p2 samples required",
        });
    }
    let threshold = scaled_threshold(gradient_threshold, &diagram.p2_grid);
    Ok(diagram
        .p1_grid
        .iter()
        .zip(&diagram.n_stationary)
        .map(|(&p1, row)| {
            if row.iter().all(|&n| n.abs() < ZERO_SLICE_TOL) {
                return CriticalRecord {
                    p1,
                    p2_crit: None,
                    order: None,
                    max_abs_gradient: None,
                    threshold,
                    degenerate: true,
                };
            }
            let g = gradient(&diagram.p2_grid, row);
            // first index on ties
            let (k, gmax) = g
                .iter()
                .map(|v| v.abs())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
            CriticalRecord {
                p1,
                p2_crit: Some(diagram.p2_grid[k]),
                order: Some(if gmax > threshold {
                    TransitionOrder::Discontinuous
                } else {
                    TransitionOrder::Continuous
                }),
                max_abs_gradient: Some(gmax),
                threshold,
                degenerate: false,
            }
        })
        .collect())
}

/// Midpoint between the largest discontinuous `p1` and the next continuous `p1` above it.
pub fn order_boundary(records: &[CriticalRecord]) -> Option<f64> {
    let last_disc = records
        .iter()
        .filter(|r| r.order == Some(TransitionOrder::Discontinuous))
        .map(|r| r.p1)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))?;
    let next_cont = records
        .iter()
        .filter(|r| r.order == Some(TransitionOrder::Continuous) && r.p1 > last_disc)
        .map(|r| r.p1)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))))?;
    Some(0.5 * (last_disc + next_cont))
}

/// `n` samples evenly spaced on `[lo, hi]`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}
