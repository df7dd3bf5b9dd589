//! Exact evolution of the reduced row density matrix for small rows.
//!
//! Two backends implement the same one-step map:
//!
//! * [`step_kraus`] applies the unitary staircase `U_{1,2} U_{2,3} ⋯ U_{L-1,L}`
//!   (rightmost factor first) and then the single-site decay channel on every
//!   site, working on the vectorized density matrix;
//! * [`AncillaChannel`] couples the row to a fresh row of targets in `|∘⟩`,
//!   applies the full gate sweep `G_1 G_2 ⋯ G_L` and traces out the old row.
//!
//! Basis ordering: site 1 is the most significant bit, `|∘⟩ ↦ 0`, `|•⟩ ↦ 1`.

use nalgebra::SymmetricEigen;

use crate::error::{QcaError, Result};
use crate::gates::{vectorize_site, LocalOperators};
use crate::linalg::{apply_gate, c, conj, kron, mat, CMat, C64, ZERO};
use crate::series::{ObservableSet, SiteObservables, TimeSeries};

/// Largest row handled by the dense backends (the ancilla backend works on
/// `2L` qubits).
pub const MAX_DENSE_SITES: usize = 7;

/// Initial product states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    FullyOccupied,
    Vacuum,
    MaximallyMixed,
    /// One Bloch triple `(⟨σˣ⟩, ⟨σʸ⟩, 2⟨n⟩-1)` per site, or a single triple
    /// repeated on every site.
    Product(Vec<[f64; 3]>),
}

impl InitialKind {
    /// Per-site Bloch triples for a row of `l` sites.
    pub fn bloch_triples(&self, l: usize) -> Result<Vec<[f64; 3]>> {
        Ok(match self {
            InitialKind::FullyOccupied => vec![[0.0, 0.0, 1.0]; l],
            InitialKind::Vacuum => vec![[0.0, 0.0, -1.0]; l],
            InitialKind::MaximallyMixed => vec![[0.0, 0.0, 0.0]; l],
            InitialKind::Product(v) if v.len() == 1 => vec![v[0]; l],
            InitialKind::Product(v) if v.len() == l => v.clone(),
            InitialKind::Product(v) => {
                return Err(QcaError::Shape {
                    expected: format!("1 or {l} Bloch triples"),
                    got: v.len().to_string(),
                })
            }
        })
    }
}

/// Single-site density matrix `(1 + xσˣ + yσʸ + z(2n - 1)) / 2`.
pub fn bloch_density(bloch: [f64; 3]) -> Result<CMat> {
    let [x, y, z] = bloch;
    let r2 = x * x + y * y + z * z;
    if !r2.is_finite() || r2 > 1.0 + 1e-12 {
        return Err(QcaError::Domain {
            field: "bloch",
            value: r2.sqrt(),
            reason: "Bloch vector length must not exceed 1",
        });
    }
    Ok(mat(
        2,
        2,
        &[
            c((1.0 - z) / 2.0, 0.0),
            c(x / 2.0, y / 2.0),
            c(x / 2.0, -y / 2.0),
            c((1.0 + z) / 2.0, 0.0),
        ],
    ))
}

/// Density matrix of one row of `l` sites, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RowState {
    l: usize,
    data: Vec<C64>,
}

/// Numerical health of a [`RowState`]. Violations are reported, never repaired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub trace_error: f64,
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
}

impl RowState {
    pub fn initial(l: usize, kind: &InitialKind) -> Result<Self> {
        check_sites(l, 1)?;
        let sites = kind
            .bloch_triples(l)?
            .into_iter()
            .map(bloch_density)
            .collect::<Result<Vec<_>>>()?;
        let matrix = sites[1..].iter().fold(sites[0].clone(), |acc, s| kron(&acc, s));
        Ok(Self::from_matrix_unchecked(l, &matrix))
    }

    /// Wrap a `2^l × 2^l` matrix.
    pub fn from_matrix(l: usize, matrix: &CMat) -> Result<Self> {
        check_sites(l, 1)?;
        let d = 1usize << l;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QcaError::Shape {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(Self::from_matrix_unchecked(l, matrix))
    }

    /// Wrap a row-major `4^l` vector (ket sites first).
    pub fn from_vectorized(l: usize, data: Vec<C64>) -> Result<Self> {
        check_sites(l, 1)?;
        let expected = 1usize << (2 * l);
        if data.len() != expected {
            return Err(QcaError::Shape {
                expected: expected.to_string(),
                got: data.len().to_string(),
            });
        }
        Ok(Self { l, data })
    }

    fn from_matrix_unchecked(l: usize, matrix: &CMat) -> Self {
        let d = matrix.nrows();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(matrix[(i, j)]);
            }
        }
        Self { l, data }
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        1 << self.l
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_row_slice(self.dim(), self.dim(), &self.data)
    }

    /// Row-major vectorization `|ρ⟩⟩`, a `2L`-qubit amplitude vector with the
    /// ket sites first.
    pub fn vectorized(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.matrix();
        let herm = (&m + m.adjoint()) * c(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        StateDiagnostics {
            trace_error: (self.trace() - c(1.0, 0.0)).norm(),
            hermiticity_residual: self.hermiticity_residual(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// Largest entrywise difference to another state of the same size.
    pub fn max_abs_diff(&self, other: &RowState) -> f64 {
        assert_eq!(self.l, other.l);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Per-site `⟨n⟩`, `⟨σˣ⟩`, `⟨σʸ⟩`.
    pub fn observables(&self) -> SiteObservables {
        let d = self.dim();
        let mut obs = SiteObservables {
            n: vec![0.0; self.l],
            sx: vec![0.0; self.l],
            sy: vec![0.0; self.l],
        };
        for k in 0..self.l {
            let m = 1usize << (self.l - 1 - k);
            let (mut n, mut sx, mut sy) = (0.0, ZERO, ZERO);
            for i in 0..d {
                let flipped = self.get(i ^ m, i);
                if i & m != 0 {
                    n += self.get(i, i).re;
                    sy += flipped * c(0.0, -1.0);
                } else {
                    sy += flipped * c(0.0, 1.0);
                }
                sx += flipped;
            }
            obs.n[k] = n;
            obs.sx[k] = sx.re;
            obs.sy[k] = sy.re;
        }
        obs
    }
}

fn check_sites(l: usize, min: usize) -> Result<()> {
    if l < min {
        return Err(QcaError::Domain {
            field: "l",
            value: l as f64,
            reason: "too few sites",
        });
    }
    if l > MAX_DENSE_SITES {
        return Err(QcaError::Capacity {
            what: "dense sites",
            requested: l,
            max: MAX_DENSE_SITES,
        });
    }
    Ok(())
}

/// Per-site single-site observables of a product state, without building it.
pub fn initial_observables(l: usize, kind: &InitialKind) -> Result<SiteObservables> {
    let triples = kind.bloch_triples(l)?;
    for t in &triples {
        bloch_density(*t)?;
    }
    Ok(SiteObservables {
        n: triples.iter().map(|t| (1.0 + t[2]) / 2.0).collect(),
        sx: triples.iter().map(|t| t[0]).collect(),
        sy: triples.iter().map(|t| t[1]).collect(),
    })
}

/// One step through the Kraus-sum route.
pub fn step_kraus(state: &RowState, ops: &LocalOperators) -> Result<RowState> {
    let l = state.l;
    check_sites(l, 2)?;
    let mut v = state.data.clone();
    let n = 2 * l;
    let u = &ops.u_two_site;
    let u_bar = conj(u);
    for k in (0..l - 1).rev() {
        apply_gate(&mut v, n, u, &[k, k + 1]);
        apply_gate(&mut v, n, &u_bar, &[l + k, l + k + 1]);
    }
    for k in 0..l {
        apply_gate(&mut v, n, &ops.dissipation_superop, &[k, l + k]);
    }
    Ok(RowState { l, data: v })
}

/// The one-step map obtained by coupling the row to a row of `|∘⟩` targets,
/// sweeping `G_1 G_2 ⋯ G_L` and tracing out the old row.
///
/// Stored as the blocks `A_m = (⟨m| ⊗ 1) 𝒢 (1 ⊗ |0⟩)` of the two-row isometry,
/// so that `ρ' = Σ_m A_m ρ A_m†`.
#[derive(Debug, Clone)]
pub struct AncillaChannel {
    l: usize,
    blocks: Vec<CMat>,
}

impl AncillaChannel {
    pub fn new(l: usize, ops: &LocalOperators) -> Result<Self> {
        check_sites(l, 2)?;
        let d = 1usize << l;
        let n = 2 * l;
        // qubits 0..l: old row (controls), l..2l: new row (targets)
        let mut blocks = vec![CMat::zeros(d, d); d];
        let mut v = vec![ZERO; d * d];
        for x in 0..d {
            v.iter_mut().for_each(|z| *z = ZERO);
            v[x * d] = c(1.0, 0.0);
            for k in (1..=l).rev() {
                if k == 1 {
                    apply_gate(&mut v, n, &ops.boundary_gate, &[0, l]);
                } else {
                    apply_gate(&mut v, n, &ops.local_gate, &[k - 2, k - 1, l + k - 1]);
                }
            }
            for (m, block) in blocks.iter_mut().enumerate() {
                for y in 0..d {
                    block[(y, x)] = v[m * d + y];
                }
            }
        }
        Ok(Self { l, blocks })
    }

    pub fn apply(&self, state: &RowState) -> Result<RowState> {
        if state.l != self.l {
            return Err(QcaError::Shape {
                expected: format!("{} sites", self.l),
                got: format!("{} sites", state.l),
            });
        }
        let rho = state.matrix();
        let d = state.dim();
        let mut out = CMat::zeros(d, d);
        for a in &self.blocks {
            out += a * &rho * a.adjoint();
        }
        Ok(RowState::from_matrix_unchecked(self.l, &out))
    }
}

/// One step through the ancilla-trace route.
pub fn step_ancilla(state: &RowState, ops: &LocalOperators) -> Result<RowState> {
    AncillaChannel::new(state.l, ops)?.apply(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseBackend {
    Kraus,
    Ancilla,
}

/// Worst-case state diagnostics over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunDiagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_residual: f64,
    pub min_eigenvalue: f64,
}

fn record(series: &mut TimeSeries, t: usize, state: &RowState) {
    series.push(t, &state.observables());
}

/// Evolve for `t_max` steps, recording observables at steps `0..=t_max`.
pub fn evolve(
    state0: &RowState,
    ops: &LocalOperators,
    t_max: usize,
    observables: ObservableSet,
    backend: DenseBackend,
) -> Result<TimeSeries> {
    evolve_inner(state0, ops, t_max, observables, backend, false).map(|(s, _, _)| s)
}

/// Like [`evolve`], additionally tracking trace, Hermiticity and positivity
/// at every step and returning the final state.
pub fn evolve_checked(
    state0: &RowState,
    ops: &LocalOperators,
    t_max: usize,
    observables: ObservableSet,
    backend: DenseBackend,
) -> Result<(TimeSeries, RunDiagnostics, RowState)> {
    evolve_inner(state0, ops, t_max, observables, backend, true)
        .map(|(s, d, st)| (s, d.expect("diagnostics requested"), st))
}

fn evolve_inner(
    state0: &RowState,
    ops: &LocalOperators,
    t_max: usize,
    observables: ObservableSet,
    backend: DenseBackend,
    checked: bool,
) -> Result<(TimeSeries, Option<RunDiagnostics>, RowState)> {
    let mut series = TimeSeries::new(observables);
    let mut state = state0.clone();
    record(&mut series, 0, &state);
    let mut diag = checked.then(|| {
        let d = state.diagnostics();
        RunDiagnostics {
            max_trace_error: d.trace_error,
            max_hermiticity_residual: d.hermiticity_residual,
            min_eigenvalue: d.min_eigenvalue,
        }
    });
    let channel = match backend {
        DenseBackend::Ancilla if t_max > 0 => Some(AncillaChannel::new(state.l, ops)?),
        _ => None,
    };
    for t in 1..=t_max {
        state = match &channel {
            Some(ch) => ch.apply(&state)?,
            None => step_kraus(&state, ops)?,
        };
        record(&mut series, t, &state);
        if let Some(d) = diag.as_mut() {
            let s = state.diagnostics();
            d.max_trace_error = d.max_trace_error.max(s.trace_error);
            d.max_hermiticity_residual = d.max_hermiticity_residual.max(s.hermiticity_residual);
            d.min_eigenvalue = d.min_eigenvalue.min(s.min_eigenvalue);
        }
    }
    Ok((series, diag, state))
}

/// Vectorized single-site state, used to seed product MPS.
pub fn bloch_vectorized(bloch: [f64; 3]) -> Result<[C64; 4]> {
    Ok(vectorize_site(&bloch_density(bloch)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::number_op;
    use crate::linalg::{embed, identity, max_abs, ONE};

    fn ops(p1: f64, p2: f64) -> LocalOperators {
        LocalOperators::from_probabilities(p1, p2).unwrap()
    }

    #[test]
    fn initial_states() {
        let full = RowState::initial(3, &InitialKind::FullyOccupied).unwrap();
        assert_eq!(full.get(7, 7), ONE);
        assert!((full.trace() - ONE).norm() < 1e-15);
        assert_eq!(full.observables().n, vec![1.0; 3]);

        let vac = RowState::initial(2, &InitialKind::Vacuum).unwrap();
        assert_eq!(vac.get(0, 0), ONE);
        assert_eq!(vac.observables().n, vec![0.0; 2]);

        let single = RowState::initial(1, &InitialKind::Product(vec![[0.0, 0.0, 1.0]])).unwrap();
        assert!(max_abs(&(single.matrix() - number_op())) < 1e-15);
    }

    #[test]
    fn rejects_bloch_vector_outside_ball() {
        let err = RowState::initial(2, &InitialKind::Product(vec![[0.8, 0.8, 0.0]])).unwrap_err();
        assert!(matches!(err, QcaError::Domain { field: "bloch", .. }));
    }

    #[test]
    fn rejects_oversized_rows() {
        let err = RowState::initial(12, &InitialKind::Vacuum).unwrap_err();
        assert!(matches!(err, QcaError::Capacity { .. }));
    }

    #[test]
    fn maximally_mixed_site_observables() {
        let s = RowState::initial(1, &InitialKind::MaximallyMixed).unwrap();
        let o = s.observables();
        assert_eq!((o.n[0], o.sx[0], o.sy[0]), (0.5, 0.0, 0.0));
    }

    #[test]
    fn transverse_observables_follow_bloch_components() {
        let s = RowState::initial(2, &InitialKind::Product(vec![[0.3, -0.4, 0.5], [0.0, 0.6, 0.0]]))
            .unwrap();
        let o = s.observables();
        assert!((o.sx[0] - 0.3).abs() < 1e-15 && (o.sy[0] + 0.4).abs() < 1e-15);
        assert!((o.n[0] - 0.75).abs() < 1e-15);
        assert!((o.sy[1] - 0.6).abs() < 1e-15 && o.sx[1].abs() < 1e-15);
    }

    #[test]
    fn vacuum_is_absorbing_for_both_backends() {
        let vac = RowState::initial(4, &InitialKind::Vacuum).unwrap();
        let o = ops(0.7, 0.3);
        assert_eq!(step_kraus(&vac, &o).unwrap().max_abs_diff(&vac), 0.0);
        assert!(step_ancilla(&vac, &o).unwrap().max_abs_diff(&vac) < 1e-15);
    }

    #[test]
    fn independent_decay_without_branching() {
        let full = RowState::initial(4, &InitialKind::FullyOccupied).unwrap();
        let s = evolve(&full, &ops(0.0, 0.1), 10, ObservableSet::MEAN_ONLY, DenseBackend::Kraus)
            .unwrap();
        for (t, n) in s.n_mean.iter().enumerate() {
            assert!((n - 0.9f64.powi(t as i32)).abs() < 1e-12);
        }
        assert!((s.n_mean[3] - 0.729).abs() < 1e-12);
    }

    #[test]
    fn zero_steps_records_initial_observables_only() {
        let full = RowState::initial(3, &InitialKind::FullyOccupied).unwrap();
        let s = evolve(&full, &ops(0.3, 0.1), 0, ObservableSet::ALL, DenseBackend::Ancilla).unwrap();
        assert_eq!(s.times, vec![0]);
        assert_eq!(s.n_mean, vec![1.0]);
    }

    #[test]
    fn full_branching_on_two_sites_spreads_the_pair() {
        // |••> → symmetric one-particle state; mean density 1/2
        let full = RowState::initial(2, &InitialKind::FullyOccupied).unwrap();
        let s = evolve(&full, &ops(1.0, 0.0), 1, ObservableSet::ALL, DenseBackend::Kraus).unwrap();
        assert!((s.n_mean[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backends_agree_on_one_step() {
        let full = RowState::initial(3, &InitialKind::FullyOccupied).unwrap();
        let o = ops(0.5, 0.2);
        let a = step_kraus(&full, &o).unwrap();
        let b = step_ancilla(&full, &o).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn ancilla_blocks_form_a_trace_preserving_channel() {
        let o = ops(0.45, 0.35);
        let ch = AncillaChannel::new(3, &o).unwrap();
        let sum = ch
            .blocks
            .iter()
            .fold(CMat::zeros(8, 8), |acc, a| acc + a.adjoint() * a);
        assert!(max_abs(&(sum - identity(8))) < 1e-12);
    }

    #[test]
    fn kraus_step_matches_explicit_kraus_string_sum() {
        // brute force over all 2^L Kraus strings on L = 3
        let l = 3;
        let o = ops(0.6, 0.25);
        let rho0 = RowState::initial(l, &InitialKind::Product(vec![[0.2, 0.1, 0.5], [0.0, 0.0, 1.0], [-0.3, 0.4, 0.1]]))
            .unwrap();
        let u_t = embed(l, &o.u_two_site, &[0, 1]) * embed(l, &o.u_two_site, &[1, 2]);
        let tilde = &u_t * rho0.matrix() * u_t.adjoint();
        let mut expected = CMat::zeros(8, 8);
        for m in 0..8usize {
            let mut k = identity(1);
            for site in 0..l {
                let op = if m & (1 << (l - 1 - site)) != 0 { &o.kraus_filled } else { &o.kraus_empty };
                k = kron(&k, op);
            }
            expected += &k * &tilde * k.adjoint();
        }
        let got = step_kraus(&rho0, &o).unwrap();
        assert!(max_abs(&(got.matrix() - expected)) < 1e-13);
    }

    #[test]
    fn decay_only_step_matches_sigma_minus_transfer() {
        let one = RowState::initial(2, &InitialKind::FullyOccupied).unwrap();
        let out = step_kraus(&one, &ops(0.0, 1.0)).unwrap();
        // both sites decay deterministically
        assert!((out.get(0, 0) - ONE).norm() < 1e-15);
    }
}
