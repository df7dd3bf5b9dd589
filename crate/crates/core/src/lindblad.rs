//! Continuous-time quantum contact process on a small open row.
//!
//! The generator is
//! `L[ρ] = -i[H, ρ] + γ Σ_k (σ⁻_k ρ σ⁺_k - ½{n_k, ρ})` with
//! `H = Ω Σ_k (σʸ_k n_{k+1} + n_k σʸ_{k+1})`, the Hamiltonian whose one-step
//! propagator `exp(-iδt H)` the QCA unitary staircase approximates. It is
//! applied matrix-free to the row-major vectorized density matrix and
//! integrated with classical fourth-order Runge–Kutta.

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseBackend, InitialKind, RowState, MAX_DENSE_SITES};
use crate::error::{QcaError, Result};
use crate::gates::{number_op, sigma_y, LocalOperators};
use crate::linalg::{apply_gate, c, kron, CMat, C64, ZERO};
use crate::series::{ObservableSet, TimeSeries};

/// Largest row accepted by [`compare_qca_to_lindblad`].
pub const MAX_COMPARISON_SITES: usize = 6;

/// Default upper bound on the Runge–Kutta step, in units of `1/γ`.
pub const DEFAULT_RK_MAX_STEP: f64 = 2.5e-3;

/// How the decay angle of the QCA relates to the continuous decay rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// `θ² = γδt`: the QCA decays with probability `≈ γδt` per step.
    #[default]
    ThetaSqEqGammaDt,
    /// `θ² = γδt/2`: the QCA decays with probability `≈ γδt/2` per step.
    ThetaSqEqHalfGammaDt,
}

impl RateConvention {
    /// `θ²` for a given `γδt`.
    pub fn theta_sq(self, gamma_dt: f64) -> f64 {
        match self {
            RateConvention::ThetaSqEqGammaDt => gamma_dt,
            RateConvention::ThetaSqEqHalfGammaDt => gamma_dt / 2.0,
        }
    }

    /// `γδt` for a given `θ²`.
    pub fn gamma_dt(self, theta_sq: f64) -> f64 {
        match self {
            RateConvention::ThetaSqEqGammaDt => theta_sq,
            RateConvention::ThetaSqEqHalfGammaDt => 2.0 * theta_sq,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateConvention::ThetaSqEqGammaDt => "theta-sq-eq-gamma-dt",
            RateConvention::ThetaSqEqHalfGammaDt => "theta-sq-eq-half-gamma-dt",
        }
    }
}

impl std::str::FromStr for RateConvention {
    type Err = QcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta-sq-eq-gamma-dt" => Ok(RateConvention::ThetaSqEqGammaDt),
            "theta-sq-eq-half-gamma-dt" => Ok(RateConvention::ThetaSqEqHalfGammaDt),
            other => Err(QcaError::Format(format!("unknown rate convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    pub l: usize,
    pub omega: f64,
    pub gamma: f64,
    /// Runge–Kutta step.
    pub dt: f64,
    pub rate_convention: RateConvention,
}

impl LindbladParams {
    pub fn new(l: usize, omega: f64, gamma: f64, dt: f64, rate_convention: RateConvention) -> Result<Self> {
        if l == 0 {
            return Err(QcaError::Domain {
                field: "l",
                value: 0.0,
                reason: "at least one site required",
            });
        }
        if l > MAX_DENSE_SITES {
            return Err(QcaError::Capacity {
                what: "lindblad sites",
                requested: l,
                max: MAX_DENSE_SITES,
            });
        }
        if !omega.is_finite() {
            return Err(QcaError::Domain {
                field: "omega",
                value: omega,
                reason: "must be finite",
            });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(QcaError::Domain {
                field: "gamma",
                value: gamma,
                reason: "must be positive",
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QcaError::Domain {
                field: "dt",
                value: dt,
                reason: "must be positive",
            });
        }
        Ok(Self {
            l,
            omega,
            gamma,
            dt,
            rate_convention,
        })
    }
}

/// `Ω (σʸ ⊗ n + n ⊗ σʸ)`.
pub fn hamiltonian_term(omega: f64) -> CMat {
    (kron(&sigma_y(), &number_op()) + kron(&number_op(), &sigma_y())) * c(omega, 0.0)
}

struct Generator {
    l: usize,
    gamma: f64,
    ket_term: CMat,
    bra_term: CMat,
    scratch: Vec<C64>,
}

impl Generator {
    fn new(params: &LindbladParams) -> Self {
        let h = hamiltonian_term(params.omega);
        Self {
            l: params.l,
            gamma: params.gamma,
            bra_term: h.transpose(),
            ket_term: h,
            scratch: vec![ZERO; 1 << (2 * params.l)],
        }
    }

    fn apply(&mut self, rho: &[C64], out: &mut [C64]) {
        let l = self.l;
        let n = 2 * l;
        let d = 1usize << l;
        out.iter_mut().for_each(|z| *z = ZERO);

        // -i (Hρ - ρH), with ρH acting as Hᵀ on the bra qubits
        let minus_i = c(0.0, -1.0);
        for k in 0..l.saturating_sub(1) {
            self.scratch.copy_from_slice(rho);
            apply_gate(&mut self.scratch, n, &self.ket_term, &[k, k + 1]);
            for (o, s) in out.iter_mut().zip(&self.scratch) {
                *o += minus_i * s;
            }
            self.scratch.copy_from_slice(rho);
            apply_gate(&mut self.scratch, n, &self.bra_term, &[l + k, l + k + 1]);
            for (o, s) in out.iter_mut().zip(&self.scratch) {
                *o -= minus_i * s;
            }
        }

        // γ Σ_k (σ⁻ρσ⁺ - ½{n, ρ})
        for k in 0..l {
            let m = 1usize << (l - 1 - k);
            for i in 0..d {
                for j in 0..d {
                    let idx = i * d + j;
                    let occupied = ((i & m != 0) as u8 + (j & m != 0) as u8) as f64;
                    let mut acc = rho[idx] * (-0.5 * occupied);
                    if i & m == 0 && j & m == 0 {
                        acc += rho[(i | m) * d + (j | m)];
                    }
                    out[idx] += acc * self.gamma;
                }
            }
        }
    }
}

/// `L[ρ]` for a row state; the result has the shape of a state but is a derivative.
pub fn qcp_generator_apply(state: &RowState, params: &LindbladParams) -> Result<RowState> {
    check_state(state, params)?;
    let mut generator = Generator::new(params);
    let mut out = vec![ZERO; state.vectorized().len()];
    generator.apply(state.vectorized(), &mut out);
    RowState::from_vectorized(params.l, out)
}

fn check_state(state: &RowState, params: &LindbladParams) -> Result<()> {
    if state.sites() != params.l {
        return Err(QcaError::Shape {
            expected: format!("{} sites", params.l),
            got: format!("{} sites", state.sites()),
        });
    }
    Ok(())
}

/// Output of a Runge–Kutta run.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTrajectory {
    /// Physical time of each recorded sample.
    pub physical_times: Vec<f64>,
    /// Observables per sample; `times` counts samples.
    pub series: TimeSeries,
    /// Largest `|Tr ρ - Tr ρ₀|` over all steps.
    pub max_trace_drift: f64,
    pub final_state: RowState,
}

/// Integrate for `n_steps` steps of `params.dt`, sampling every `record_every` steps.
pub fn integrate_rk4_steps(
    state0: &RowState,
    params: &LindbladParams,
    n_steps: usize,
    record_every: usize,
    observables: ObservableSet,
) -> Result<LindbladTrajectory> {
    check_state(state0, params)?;
    if record_every == 0 {
        return Err(QcaError::Domain {
            field: "record_every",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let len = state0.vectorized().len();
    let mut generator = Generator::new(params);
    let mut rho = state0.vectorized().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
    let mut tmp = vec![ZERO; len];
    let h = params.dt;
    let d = 1usize << params.l;
    let trace = |v: &[C64]| -> C64 { (0..d).map(|i| v[i * d + i]).sum() };
    let trace0 = trace(&rho);

    let mut series = TimeSeries::new(observables);
    let mut physical_times = Vec::new();
    let mut record = |rho: &[C64], step: usize, series: &mut TimeSeries| -> Result<()> {
        let state = RowState::from_vectorized(params.l, rho.to_vec())?;
        series.push(series.len(), &state.observables());
        physical_times.push(step as f64 * h);
        Ok(())
    };
    record(&rho, 0, &mut series)?;

    let mut max_drift = 0.0_f64;
    for step in 1..=n_steps {
        generator.apply(&rho, &mut k1);
        axpy(&mut tmp, &rho, &k1, h / 2.0);
        generator.apply(&tmp, &mut k2);
        axpy(&mut tmp, &rho, &k2, h / 2.0);
        generator.apply(&tmp, &mut k3);
        axpy(&mut tmp, &rho, &k3, h);
        generator.apply(&tmp, &mut k4);
        for i in 0..len {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        let drift = (trace(&rho) - trace0).norm();
        if !drift.is_finite() {
            return Err(QcaError::Numerical {
                site: None,
                message: format!("Runge-Kutta state diverged at step {step}"),
            });
        }
        max_drift = max_drift.max(drift);
        if step % record_every == 0 {
            record(&rho, step, &mut series)?;
        }
    }
    Ok(LindbladTrajectory {
        physical_times,
        series,
        max_trace_drift: max_drift,
        final_state: RowState::from_vectorized(params.l, rho)?,
    })
}

fn axpy(out: &mut [C64], x: &[C64], y: &[C64], a: f64) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

/// Integrate to `t_final`, which must be a whole number of steps `params.dt`.
pub fn integrate_rk4(
    state0: &RowState,
    params: &LindbladParams,
    t_final: f64,
    observables: ObservableSet,
) -> Result<LindbladTrajectory> {
    let n_steps = whole_steps("t_final", t_final, params.dt)?;
    integrate_rk4_steps(state0, params, n_steps, 1, observables)
}

fn whole_steps(field: &'static str, total: f64, step: f64) -> Result<usize> {
    if !(total >= 0.0 && total.is_finite()) {
        return Err(QcaError::Domain {
            field,
            value: total,
            reason: "must be finite and non-negative",
        });
    }
    let n = (total / step).round();
    if (n * step - total).abs() > 1e-9 * total.max(step) {
        return Err(QcaError::Domain {
            field,
            value: total,
            reason: "must be a whole number of steps",
        });
    }
    Ok(n as usize)
}

/// `(p1, p2)` of the QCA approximating the continuous process at step `γδt`.
pub fn continuous_to_probabilities(omega_over_gamma: f64, gamma_dt: f64, convention: RateConvention) -> (f64, f64) {
    let p1 = (2f64.sqrt() * omega_over_gamma * gamma_dt).sin().powi(2);
    let p2 = convention.theta_sq(gamma_dt).sqrt().sin().powi(2);
    (p1, p2)
}

/// Inverse of [`continuous_to_probabilities`]: `(Ω/γ, γδt)`.
pub fn probabilities_to_continuous(p1: f64, p2: f64, convention: RateConvention) -> Result<(f64, f64)> {
    crate::error::check_probability("p1", p1)?;
    crate::error::check_probability("p2", p2)?;
    if p2 == 0.0 {
        return Err(QcaError::Domain {
            field: "p2",
            value: p2,
            reason: "no decay rate without decay",
        });
    }
    let theta = p2.sqrt().asin();
    let gamma_dt = convention.gamma_dt(theta * theta);
    let omega_dt = p1.sqrt().asin() / 2f64.sqrt();
    Ok((omega_dt / gamma_dt, gamma_dt))
}

/// QCA-versus-master-equation overlay on the common time grid `t = step·δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub l: usize,
    pub omega_over_gamma: f64,
    pub gamma_dt: f64,
    /// Physical end time in units of `1/γ`.
    pub t_final: f64,
    pub rate_convention: RateConvention,
    pub p1: f64,
    pub p2: f64,
    /// Runge–Kutta step in units of `1/γ`.
    pub rk_step: f64,
    pub times: Vec<f64>,
    pub n_mean_qca: Vec<f64>,
    pub n_mean_lindblad: Vec<f64>,
    pub max_abs_diff: f64,
    pub terminal_abs_diff: f64,
    pub lindblad_max_trace_drift: f64,
}

/// Run the dense QCA at the probabilities implied by `(Ω/γ, γδt)` and the
/// master equation at rate `γ = 1`, both from the fully occupied row.
pub fn compare_qca_to_lindblad(
    l: usize,
    omega_over_gamma: f64,
    gamma_dt: f64,
    t_final: f64,
    convention: RateConvention,
) -> Result<ComparisonRecord> {
    let (p1, p2) = continuous_to_probabilities(omega_over_gamma, gamma_dt, convention);
    compare_inner(l, omega_over_gamma, gamma_dt, t_final, convention, p1, p2, DEFAULT_RK_MAX_STEP)
}

/// As [`compare_qca_to_lindblad`], starting from explicit probabilities whose
/// continuous parameters are recovered under `convention`. The run covers the
/// whole number of steps nearest to `t_final`; the record holds the actual end.
pub fn compare_at_probabilities(
    l: usize,
    p1: f64,
    p2: f64,
    t_final: f64,
    convention: RateConvention,
) -> Result<ComparisonRecord> {
    let (omega_over_gamma, gamma_dt) = probabilities_to_continuous(p1, p2, convention)?;
    // rounded probabilities make t_final/γδt slightly non-integral
    let steps = (t_final / gamma_dt).round();
    compare_inner(l, omega_over_gamma, gamma_dt, steps * gamma_dt, convention, p1, p2, DEFAULT_RK_MAX_STEP)
}

#[allow(clippy::too_many_arguments)]
fn compare_inner(
    l: usize,
    omega_over_gamma: f64,
    gamma_dt: f64,
    t_final: f64,
    convention: RateConvention,
    p1: f64,
    p2: f64,
    rk_max_step: f64,
) -> Result<ComparisonRecord> {
    if l > MAX_COMPARISON_SITES {
        return Err(QcaError::Capacity {
            what: "comparison sites",
            requested: l,
            max: MAX_COMPARISON_SITES,
        });
    }
    if !(gamma_dt > 0.0) {
        return Err(QcaError::Domain {
            field: "gamma_dt",
            value: gamma_dt,
            reason: "must be positive",
        });
    }
    let steps = whole_steps("t_final", t_final, gamma_dt)?;
    let substeps = (gamma_dt / rk_max_step).ceil().max(1.0) as usize;
    let rk_step = gamma_dt / substeps as f64;

    let init = RowState::initial(l, &InitialKind::FullyOccupied)?;
    let ops = LocalOperators::from_probabilities(p1, p2)?;
    let qca = dense::evolve(&init, &ops, steps, ObservableSet::MEAN_ONLY, DenseBackend::Kraus)?;

    let params = LindbladParams::new(l, omega_over_gamma, 1.0, rk_step, convention)?;
    let lb = integrate_rk4_steps(&init, &params, steps * substeps, substeps, ObservableSet::MEAN_ONLY)?;

    let diffs: Vec<f64> = qca
        .n_mean
        .iter()
        .zip(&lb.series.n_mean)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(ComparisonRecord {
        l,
        omega_over_gamma,
        gamma_dt,
        t_final,
        rate_convention: convention,
        p1,
        p2,
        rk_step,
        times: (0..=steps).map(|s| s as f64 * gamma_dt).collect(),
        n_mean_qca: qca.n_mean,
        n_mean_lindblad: lb.series.n_mean,
        max_abs_diff: diffs.iter().copied().fold(0.0, f64::max),
        terminal_abs_diff: diffs.last().copied().unwrap_or(0.0),
        lindblad_max_trace_drift: lb.max_trace_drift,
    })
}
