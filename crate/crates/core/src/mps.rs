//! Matrix-product representation of the vectorized row density matrix.
//!
//! Every site carries a physical index of dimension 4 (`2a + b` for ket `a`
//! and bra `b`). One QCA step applies the doubled unitaries `U ⊗ Ū` as a
//! right-to-left staircase with SVD truncation, then the single-site decay
//! superoperator on every site, and finally rescales so that the vectorized
//! trace `⟨⟨1|ρ⟩⟩` equals one.

use std::io::Write;

use crate::dense::{bloch_vectorized, InitialKind, MAX_DENSE_SITES};
use crate::error::{QcaError, Result};
use crate::gates::{doubled_two_site, LocalOperators};
use crate::linalg::{c, CMat, C64, ONE, ZERO};
use crate::series::{fmt_f64, ObservableSet, SiteObservables, TimeSeries};

const PHYS: usize = 4;

/// Default relative singular-value cutoff.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

// Row-major vectorized single-site functionals: Tr(Xρ) = Σ_s f[s] ρ_s.
const TRACE_VEC: [C64; 4] = [ONE, ZERO, ZERO, ONE];
const N_VEC: [C64; 4] = [ZERO, ZERO, ZERO, ONE];
const SX_VEC: [C64; 4] = [ZERO, ONE, ONE, ZERO];
const SY_VEC: [C64; 4] = [ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO];

/// Truncation record of one two-site update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Discarded squared singular values relative to the total.
    pub discarded_weight: f64,
    pub kept: usize,
}

/// Per-step diagnostics of [`VectorizedMps::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: usize,
    pub max_discarded_weight: f64,
    /// Real part of the vectorized trace before renormalization.
    pub pre_norm_trace: f64,
    pub max_bond_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedMps {
    l: usize,
    /// Site tensors grouped as `(left_bond * 4 + phys, right_bond)`.
    tensors: Vec<CMat>,
    chi_max: usize,
    cutoff: f64,
    ortho_center: Option<usize>,
}

impl VectorizedMps {
    /// Bond-dimension-one MPS of a product density matrix.
    pub fn from_product(l: usize, kind: &InitialKind, chi_max: usize, cutoff: f64) -> Result<Self> {
        if l < 2 {
            return Err(QcaError::Domain {
                field: "l",
                value: l as f64,
                reason: "at least two sites required",
            });
        }
        if chi_max < 1 {
            return Err(QcaError::Domain {
                field: "chi_max",
                value: chi_max as f64,
                reason: "must be at least 1",
            });
        }
        if !(cutoff >= 0.0) {
            return Err(QcaError::Domain {
                field: "cutoff",
                value: cutoff,
                reason: "must be non-negative",
            });
        }
        let tensors = kind
            .bloch_triples(l)?
            .into_iter()
            .map(|b| bloch_vectorized(b).map(|v| CMat::from_column_slice(PHYS, 1, &v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            l,
            tensors,
            chi_max,
            cutoff,
            ortho_center: None,
        })
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    /// Bond dimensions `[1, d_1, ..., d_{L-1}, 1]`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tensors.iter().map(|t| t.nrows() / PHYS).collect();
        dims.push(self.tensors[self.l - 1].ncols());
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Largest deviation from left (right) isometry among the tensors left
    /// (right) of the orthogonality center; `None` without a center.
    pub fn isometry_residual(&self) -> Option<f64> {
        let center = self.ortho_center?;
        let mut worst = 0.0_f64;
        for k in 0..center {
            let a = &self.tensors[k];
            let g = a.adjoint() * a - CMat::identity(a.ncols(), a.ncols());
            worst = worst.max(max_norm(&g));
        }
        for k in center + 1..self.l {
            let b = to_right_grouped(&self.tensors[k]);
            let g = &b * b.adjoint() - CMat::identity(b.nrows(), b.nrows());
            worst = worst.max(max_norm(&g));
        }
        Some(worst)
    }

    /// Bring the MPS into mixed canonical form centred at `center`.
    pub fn move_center(&mut self, center: usize) -> Result<()> {
        assert!(center < self.l);
        let (lo, hi) = match self.ortho_center {
            Some(c) => (c, c),
            None => (0, self.l - 1),
        };
        for k in lo..center {
            self.left_orthonormalize(k);
        }
        for k in (center + 1..=hi).rev() {
            self.right_orthonormalize(k);
        }
        self.ortho_center = Some(center);
        Ok(())
    }

    fn left_orthonormalize(&mut self, k: usize) {
        let qr = self.tensors[k].clone().qr();
        let (q, r) = (qr.q(), qr.r());
        self.tensors[k] = q;
        let next = to_right_grouped(&self.tensors[k + 1]);
        self.tensors[k + 1] = to_left_grouped(&(r * next));
    }

    fn right_orthonormalize(&mut self, k: usize) {
        // M = R† Q†  from  M† = Q R
        let m = to_right_grouped(&self.tensors[k]);
        let qr = m.adjoint().qr();
        let (q, r) = (qr.q(), qr.r());
        self.tensors[k] = to_left_grouped(&q.adjoint());
        self.tensors[k - 1] = &self.tensors[k - 1] * r.adjoint();
    }

    /// Contract a 16×16 operator into sites `(k, k+1)` and split by a
    /// truncated SVD. With `center_left` the singular values go to site `k`,
    /// otherwise to `k+1`; the orthogonality center follows them.
    pub fn apply_two_site_superop(
        &mut self,
        k: usize,
        op: &CMat,
        center_left: bool,
    ) -> Result<Truncation> {
        if k + 1 >= self.l {
            return Err(QcaError::Domain {
                field: "site",
                value: k as f64,
                reason: "two-site gate needs k + 1 < L",
            });
        }
        if !matches!(self.ortho_center, Some(c) if c == k || c == k + 1) {
            self.move_center(k)?;
        }
        let left = &self.tensors[k];
        let dl = left.nrows() / PHYS;
        let dr = self.tensors[k + 1].ncols();
        // theta[(a, s1), (s2, b)]
        let theta = left * to_right_grouped(&self.tensors[k + 1]);
        let mut out = CMat::zeros(dl * PHYS, PHYS * dr);
        let mut buf = [ZERO; 16];
        for a in 0..dl {
            for b in 0..dr {
                for s1 in 0..PHYS {
                    for s2 in 0..PHYS {
                        buf[s1 * PHYS + s2] = theta[(a * PHYS + s1, s2 * dr + b)];
                    }
                }
                for s1 in 0..PHYS {
                    for s2 in 0..PHYS {
                        let row = s1 * PHYS + s2;
                        let mut acc = ZERO;
                        for (col, x) in buf.iter().enumerate() {
                            acc += op[(row, col)] * x;
                        }
                        out[(a * PHYS + s1, s2 * dr + b)] = acc;
                    }
                }
            }
        }

        let (mut u, s, mut v_t) = checked_svd(&out, k)?;

        let total: f64 = s.iter().map(|x| x * x).sum();
        let largest = s.iter().copied().fold(0.0, f64::max);
        let above_cutoff = s.iter().filter(|&&x| x > 0.0 && x >= self.cutoff * largest).count();
        let keep = above_cutoff.min(self.chi_max).max(1);
        let discarded: f64 = s.iter().skip(keep).map(|x| x * x).sum();
        let discarded_weight = if total > 0.0 { discarded / total } else { 0.0 };

        // phase gauge: largest-magnitude entry of each kept left vector real-positive
        for j in 0..keep {
            let mut best = (0usize, -1.0_f64);
            for i in 0..u.nrows() {
                let m = u[(i, j)].norm();
                if m > best.1 {
                    best = (i, m);
                }
            }
            if best.1 > 0.0 {
                let phase = u[(best.0, j)] / best.1;
                let conj = phase.conj();
                u.column_mut(j).iter_mut().for_each(|z| *z *= conj);
                v_t.row_mut(j).iter_mut().for_each(|z| *z *= phase);
            }
        }

        let u = u.columns(0, keep).into_owned();
        let v_t = v_t.rows(0, keep).into_owned();
        let sv: Vec<C64> = s.iter().take(keep).map(|&x| c(x, 0.0)).collect();
        if center_left {
            let mut us = u;
            for (j, sj) in sv.iter().enumerate() {
                us.column_mut(j).iter_mut().for_each(|z| *z *= sj);
            }
            self.tensors[k] = us;
            self.tensors[k + 1] = to_left_grouped(&v_t);
            self.ortho_center = Some(k);
        } else {
            let mut sv_t = v_t;
            for (j, sj) in sv.iter().enumerate() {
                sv_t.row_mut(j).iter_mut().for_each(|z| *z *= sj);
            }
            self.tensors[k] = u;
            self.tensors[k + 1] = to_left_grouped(&sv_t);
            self.ortho_center = Some(k + 1);
        }
        Ok(Truncation {
            discarded_weight,
            kept: keep,
        })
    }

    /// Apply a two-site unitary `U` as `U ⊗ Ū` on vectorized sites `(k, k+1)`.
    pub fn apply_doubled_two_site_gate(&mut self, k: usize, gate: &CMat) -> Result<Truncation> {
        self.apply_two_site_superop(k, &doubled_two_site(gate), true)
    }

    /// Contract a 4×4 single-site superoperator into site `k`.
    pub fn apply_site_superop(&mut self, k: usize, superop: &CMat) -> Result<()> {
        if k >= self.l {
            return Err(QcaError::Domain {
                field: "site",
                value: k as f64,
                reason: "site index out of range",
            });
        }
        let t = &mut self.tensors[k];
        let (dl, dr) = (t.nrows() / PHYS, t.ncols());
        let mut buf = [ZERO; PHYS];
        for a in 0..dl {
            for b in 0..dr {
                for (s, x) in buf.iter_mut().enumerate() {
                    *x = t[(a * PHYS + s, b)];
                }
                for s in 0..PHYS {
                    t[(a * PHYS + s, b)] = (0..PHYS).map(|u| superop[(s, u)] * buf[u]).sum();
                }
            }
        }
        if self.ortho_center != Some(k) {
            self.ortho_center = None;
        }
        Ok(())
    }

    /// Contract every site with its own single-site functional.
    fn contract(&self, functional: impl Fn(usize) -> [C64; 4]) -> C64 {
        let mut env = vec![ONE];
        for (k, t) in self.tensors.iter().enumerate() {
            let f = functional(k);
            env = transfer(&env, t, &f);
        }
        env[0]
    }

    /// Full contraction into a vector indexed by `Σ_k s_k 4^(L-1-k)`.
    pub fn to_site_vector(&self) -> Result<Vec<C64>> {
        if self.l > MAX_DENSE_SITES {
            return Err(QcaError::Capacity {
                what: "contracted MPS sites",
                requested: self.l,
                max: MAX_DENSE_SITES,
            });
        }
        // rows: physical multi-index so far, cols: right bond
        let mut acc = CMat::from_element(1, 1, ONE);
        for t in &self.tensors {
            let dl = t.nrows() / PHYS;
            let dr = t.ncols();
            let rows = acc.nrows();
            let mut next = CMat::zeros(rows * PHYS, dr);
            for r in 0..rows {
                for s in 0..PHYS {
                    for b in 0..dr {
                        next[(r * PHYS + s, b)] = (0..dl).map(|a| acc[(r, a)] * t[(a * PHYS + s, b)]).sum();
                    }
                }
            }
            acc = next;
        }
        Ok(acc.column(0).iter().copied().collect())
    }

    /// Vectorized trace `⟨⟨1|ρ⟩⟩`.
    pub fn trace(&self) -> C64 {
        self.contract(|_| TRACE_VEC)
    }

    /// Rescale so that the vectorized trace is one; returns the trace before.
    pub fn normalize_trace(&mut self) -> Result<C64> {
        let tr = self.trace();
        if !(tr.norm() > f64::MIN_POSITIVE) || !tr.is_finite() {
            return Err(QcaError::Degenerate(format!("vectorized trace {tr}")));
        }
        let target = self.ortho_center.unwrap_or(0);
        let inv = ONE / tr;
        self.tensors[target].iter_mut().for_each(|z| *z *= inv);
        Ok(tr)
    }

    /// All single-site expectations, normalized by the trace.
    pub fn observables(&self) -> Result<SiteObservables> {
        let l = self.l;
        // left[k]: environment of sites < k; right[k]: of sites > k
        let mut left = Vec::with_capacity(l);
        let mut env = vec![ONE];
        for t in &self.tensors {
            left.push(env.clone());
            env = transfer(&env, t, &TRACE_VEC);
        }
        let tr = env[0];
        if !(tr.norm() > f64::MIN_POSITIVE) || !tr.is_finite() {
            return Err(QcaError::Degenerate(format!("vectorized trace {tr}")));
        }
        let mut right = vec![Vec::new(); l];
        let mut env = vec![ONE];
        for k in (0..l).rev() {
            right[k] = env.clone();
            env = transfer_right(&env, &self.tensors[k], &TRACE_VEC);
        }

        let mut obs = SiteObservables {
            n: vec![0.0; l],
            sx: vec![0.0; l],
            sy: vec![0.0; l],
        };
        for k in 0..l {
            let close = |f: &[C64; 4]| -> C64 {
                let e = transfer(&left[k], &self.tensors[k], f);
                e.iter().zip(&right[k]).map(|(a, b)| a * b).sum::<C64>() / tr
            };
            obs.n[k] = real_part(close(&N_VEC), k)?;
            // only densities carry the Hermiticity check
            obs.sx[k] = close(&SX_VEC).re;
            obs.sy[k] = close(&SY_VEC).re;
        }
        Ok(obs)
    }

    /// `⟨⟨1⋯n_k⋯1|ρ⟩⟩ / ⟨⟨1|ρ⟩⟩`.
    pub fn density(&self, k: usize) -> Result<f64> {
        let tr = self.trace();
        if !(tr.norm() > f64::MIN_POSITIVE) {
            return Err(QcaError::Degenerate(format!("vectorized trace {tr}")));
        }
        let num = self.contract(|j| if j == k { N_VEC } else { TRACE_VEC });
        real_part(num / tr, k)
    }

    pub fn mean_density(&self) -> Result<f64> {
        Ok(self.observables()?.n_mean())
    }

    /// One QCA step: doubled unitary staircase, dissipation, trace renormalization.
    pub fn step(&mut self, ops: &LocalOperators) -> Result<StepDiagnostics> {
        let l = self.l;
        self.move_center(l - 1)?;
        let mut max_discarded = 0.0_f64;
        for k in (0..l - 1).rev() {
            let tr = self.apply_two_site_superop(k, &ops.doubled_unitary, true)?;
            max_discarded = max_discarded.max(tr.discarded_weight);
        }
        for k in 0..l {
            self.apply_site_superop(k, &ops.dissipation_superop)?;
        }
        let pre = self.normalize_trace()?;
        Ok(StepDiagnostics {
            t: 0,
            max_discarded_weight: max_discarded,
            pre_norm_trace: pre.re,
            max_bond_dim: self.max_bond_dim(),
        })
    }
}

/// Thin SVD `m = u diag(s) v_t` with descending `s`, verified by reconstruction.
fn checked_svd(m: &CMat, site: usize) -> Result<(CMat, Vec<f64>, CMat)> {
    let fm = faer::Mat::<C64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = fm.thin_svd().map_err(|e| QcaError::Numerical {
        site: Some(site),
        message: format!("SVD did not converge: {e:?}"),
    })?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let rank = fs.nrows();
    let u = CMat::from_fn(m.nrows(), rank, |i, j| fu[(i, j)]);
    let v_t = CMat::from_fn(rank, m.ncols(), |i, j| fv[(j, i)].conj());
    let s: Vec<f64> = (0..rank).map(|j| fs[j].re).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(QcaError::Numerical {
            site: Some(site),
            message: "non-finite singular value".into(),
        });
    }
    let mut us = u.clone();
    for (j, sj) in s.iter().enumerate() {
        us.column_mut(j).iter_mut().for_each(|z| *z *= sj);
    }
    let residual = max_norm(&(us * &v_t - m));
    let tol = 1e-10 * max_norm(m).max(f64::MIN_POSITIVE) * (m.nrows().max(m.ncols()) as f64).sqrt();
    if residual > tol {
        return Err(QcaError::Numerical {
            site: Some(site),
            message: format!("SVD reconstruction residual {residual:e} exceeds {tol:e}"),
        });
    }
    Ok((u, s, v_t))
}

fn real_part(z: C64, site: usize) -> Result<f64> {
    if z.im.abs() >= 1e-8 || !z.re.is_finite() {
        return Err(QcaError::Numerical {
            site: Some(site),
            message: format!("expectation value {z} is not real"),
        });
    }
    Ok(z.re)
}

fn max_norm(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `(dl*4, dr)` → `(dl, 4*dr)`.
fn to_right_grouped(t: &CMat) -> CMat {
    let (dl, dr) = (t.nrows() / PHYS, t.ncols());
    CMat::from_fn(dl, PHYS * dr, |a, sb| t[(a * PHYS + sb / dr, sb % dr)])
}

/// `(dl, 4*dr)` → `(dl*4, dr)`.
fn to_left_grouped(t: &CMat) -> CMat {
    let (dl, dr) = (t.nrows(), t.ncols() / PHYS);
    CMat::from_fn(dl * PHYS, dr, |as_, b| t[(as_ / PHYS, (as_ % PHYS) * dr + b)])
}

fn transfer(env: &[C64], t: &CMat, f: &[C64; 4]) -> Vec<C64> {
    let dr = t.ncols();
    let mut out = vec![ZERO; dr];
    for (a, e) in env.iter().enumerate() {
        for (s, fs) in f.iter().enumerate() {
            if *fs == ZERO {
                continue;
            }
            let w = e * fs;
            let row = a * PHYS + s;
            for (b, o) in out.iter_mut().enumerate() {
                *o += w * t[(row, b)];
            }
        }
    }
    out
}

fn transfer_right(env: &[C64], t: &CMat, f: &[C64; 4]) -> Vec<C64> {
    let dl = t.nrows() / PHYS;
    let mut out = vec![ZERO; dl];
    for (a, o) in out.iter_mut().enumerate() {
        for (s, fs) in f.iter().enumerate() {
            if *fs == ZERO {
                continue;
            }
            let row = a * PHYS + s;
            let acc: C64 = env.iter().enumerate().map(|(b, e)| t[(row, b)] * e).sum();
            *o += fs * acc;
        }
    }
    out
}

/// Evolve for `t_max` steps. Returns the observable series and one
/// diagnostics row per recorded step (the `t = 0` row describes the input).
pub fn evolve(
    mps0: &VectorizedMps,
    ops: &LocalOperators,
    t_max: usize,
    observables: ObservableSet,
) -> Result<(TimeSeries, Vec<StepDiagnostics>)> {
    let mut mps = mps0.clone();
    let mut series = TimeSeries::new(observables);
    let mut diags = Vec::with_capacity(t_max + 1);
    series.push(0, &mps.observables()?);
    diags.push(StepDiagnostics {
        t: 0,
        max_discarded_weight: 0.0,
        pre_norm_trace: mps.trace().re,
        max_bond_dim: mps.max_bond_dim(),
    });
    for t in 1..=t_max {
        let mut d = mps.step(ops)?;
        d.t = t;
        diags.push(d);
        series.push(t, &mps.observables()?);
    }
    Ok((series, diags))
}

/// Sidecar CSV: `t,max_discarded_weight,pre_norm_trace,max_bond_dim`.
pub fn write_diagnostics_csv<W: Write>(diags: &[StepDiagnostics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "max_discarded_weight", "pre_norm_trace", "max_bond_dim"])?;
    for d in diags {
        w.write_record([
            d.t.to_string(),
            fmt_f64(d.max_discarded_weight),
            fmt_f64(d.pre_norm_trace),
            d.max_bond_dim.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
