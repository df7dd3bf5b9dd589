//! Local operators of the QCA gate family.
//!
//! Single sites are two-level systems with `|∘⟩ ↦ 0` (empty) and `|•⟩ ↦ 1`
//! (occupied). A gate `G_k` acts on the controls `k-1`, `k` of the current
//! row and on the target `k` of the next row as
//! `G = SWAP · D · (U ⊗ 1)`, where `U` evolves the two controls coherently,
//! `D` entangles control `k` with its target and `SWAP` moves the control
//! state onto the target.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::linalg::{c, dagger, expm_hermitian, identity, kron, mat, CMat, C64, I, ONE, ZERO};

/// Occupation projector `n = |•⟩⟨•|`.
pub fn number_op() -> CMat {
    mat(2, 2, &[ZERO, ZERO, ZERO, ONE])
}

/// `σ⁻ = |∘⟩⟨•|`.
pub fn sigma_minus() -> CMat {
    mat(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// `σ⁺ = |•⟩⟨∘|`.
pub fn sigma_plus() -> CMat {
    mat(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

/// `σˣ = σ⁺ + σ⁻`.
pub fn sigma_x() -> CMat {
    mat(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// `σʸ = -iσ⁺ + iσ⁻`, i.e. `-i|•⟩⟨∘| + h.c.`
pub fn sigma_y() -> CMat {
    mat(2, 2, &[ZERO, I, -I, ZERO])
}

pub fn swap() -> CMat {
    mat(
        4,
        4,
        &[
            ONE, ZERO, ZERO, ZERO, //
            ZERO, ZERO, ONE, ZERO, //
            ZERO, ONE, ZERO, ZERO, //
            ZERO, ZERO, ZERO, ONE,
        ],
    )
}

/// Probabilities `(p1, p2)` together with the gate angles derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Coherent branching/coagulation probability.
    pub p1: f64,
    /// Decay probability.
    pub p2: f64,
    /// Dissipation angle, `sin²θ = p2`.
    pub theta: f64,
    /// Hamiltonian angle `Ω δt`, `sin²(√2 Ω δt) = p1`.
    pub omega_dt: f64,
}

impl GateParams {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let p1 = check_probability("p1", p1)?;
        let p2 = check_probability("p2", p2)?;
        Ok(Self {
            p1,
            p2,
            theta: p2.sqrt().asin(),
            omega_dt: p1.sqrt().asin() / SQRT_2,
        })
    }
}

/// Shorthand for [`GateParams::new`].
pub fn make_gate_params(p1: f64, p2: f64) -> Result<GateParams> {
    GateParams::new(p1, p2)
}

/// Two-site generator `σʸ ⊗ n + n ⊗ σʸ` (unit coupling).
pub fn two_site_generator() -> CMat {
    let n = number_op();
    let sy = sigma_y();
    kron(&sy, &n) + kron(&n, &sy)
}

/// `U = exp[-i Ωδt (σʸ ⊗ n + n ⊗ σʸ)]`.
pub fn two_site_unitary(params: &GateParams) -> CMat {
    expm_hermitian(&two_site_generator(), params.omega_dt)
}

/// `D = exp[iθ(σ⁺ ⊗ σ⁻ + σ⁻ ⊗ σ⁺)]` on control ⊗ target.
pub fn dissipation_gate(params: &GateParams) -> CMat {
    let hop = kron(&sigma_plus(), &sigma_minus()) + kron(&sigma_minus(), &sigma_plus());
    expm_hermitian(&hop, -params.theta)
}

/// Single-site Kraus operators `(K_∘, K_•)` of the decay channel.
pub fn kraus_pair(params: &GateParams) -> (CMat, CMat) {
    let (s, co) = params.theta.sin_cos();
    let k_empty = identity(2) + number_op() * c(co - 1.0, 0.0);
    let k_filled = sigma_minus() * c(0.0, s);
    (k_empty, k_filled)
}

/// `Σ_m K_m ⊗ K̄_m`, acting on a row-major vectorized 2×2 density matrix.
pub fn dissipation_superop(params: &GateParams) -> CMat {
    let (k0, k1) = kraus_pair(params);
    single_site_superop(&k0) + single_site_superop(&k1)
}

/// Superoperator `ρ ↦ A ρ A†` on a single vectorized site.
pub fn single_site_superop(a: &CMat) -> CMat {
    kron(a, &a.map(|z| z.conj()))
}

/// `G = SWAP · D · (U ⊗ 1)` on (control k-1) ⊗ (control k) ⊗ (target k).
pub fn local_gate(params: &GateParams) -> CMat {
    let u = two_site_unitary(params);
    let sd = swap() * dissipation_gate(params);
    kron(&identity(2), &sd) * kron(&u, &identity(2))
}

/// Lift a two-site operator `X` to `X ⊗ X̄` on two vectorized sites.
///
/// Each vectorized site has index `2a + b` (ket `a`, bra `b`), and the two
/// sites combine as `4 s_k + s_{k+1}`.
pub fn doubled_two_site(x: &CMat) -> CMat {
    assert_eq!(x.nrows(), 4);
    let mut out = CMat::zeros(16, 16);
    let split = |s: usize| ((s >> 3) & 1, (s >> 2) & 1, (s >> 1) & 1, s & 1);
    for row in 0..16 {
        let (a1, b1, a2, b2) = split(row);
        for col in 0..16 {
            let (a1p, b1p, a2p, b2p) = split(col);
            out[(row, col)] =
                x[(2 * a1 + a2, 2 * a1p + a2p)] * x[(2 * b1 + b2, 2 * b1p + b2p)].conj();
        }
    }
    out
}

/// Every local operator needed by the evolvers at one parameter point.
///
/// Built once and shared read-only between workers.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperators {
    pub params: GateParams,
    pub u_two_site: CMat,
    pub d_gate: CMat,
    pub swap: CMat,
    pub kraus_empty: CMat,
    pub kraus_filled: CMat,
    pub dissipation_superop: CMat,
    /// `G_k` for `k ≥ 2`, 8×8.
    pub local_gate: CMat,
    /// `G_1 = SWAP · D` (open boundary, `U_{0,1} = 1`), 4×4.
    pub boundary_gate: CMat,
    /// `U ⊗ Ū` on two vectorized sites, 16×16.
    pub doubled_unitary: CMat,
}

impl LocalOperators {
    pub fn new(params: GateParams) -> Self {
        let u = two_site_unitary(&params);
        let d = dissipation_gate(&params);
        let sw = swap();
        let (k0, k1) = kraus_pair(&params);
        let boundary_gate = &sw * &d;
        let local_gate = kron(&identity(2), &boundary_gate) * kron(&u, &identity(2));
        Self {
            params,
            doubled_unitary: doubled_two_site(&u),
            dissipation_superop: single_site_superop(&k0) + single_site_superop(&k1),
            u_two_site: u,
            d_gate: d,
            swap: sw,
            kraus_empty: k0,
            kraus_filled: k1,
            local_gate,
            boundary_gate,
        }
    }

    pub fn from_probabilities(p1: f64, p2: f64) -> Result<Self> {
        Ok(Self::new(GateParams::new(p1, p2)?))
    }

    /// `‖K_∘†K_∘ + K_•†K_• − 1‖_max`.
    pub fn kraus_completeness_residual(&self) -> f64 {
        let sum = dagger(&self.kraus_empty) * &self.kraus_empty
            + dagger(&self.kraus_filled) * &self.kraus_filled;
        crate::linalg::max_abs(&(sum - identity(2)))
    }
}

/// Row-major vectorization of a single-site density matrix.
pub fn vectorize_site(rho: &CMat) -> [C64; 4] {
    [rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unitarity_residual};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn taylor_expm(h: &CMat, t: f64) -> CMat {
        let x = h.map(|z| z * c(0.0, -t));
        let mut acc = identity(h.nrows());
        let mut term = identity(h.nrows());
        for k in 1..40 {
            term = &term * &x / c(k as f64, 0.0);
            acc += &term;
        }
        acc
    }

    #[test]
    fn params_identity_and_full_limits() {
        let p = GateParams::new(0.0, 0.0).unwrap();
        assert_eq!(p.theta, 0.0);
        assert_eq!(p.omega_dt, 0.0);

        let p = GateParams::new(1.0, 1.0).unwrap();
        assert!((p.theta - FRAC_PI_2).abs() < 1e-15);
        assert!((p.omega_dt - PI / (2.0 * SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn params_round_trip() {
        let p = GateParams::new(0.25, 0.16).unwrap();
        assert!((p.theta.sin().powi(2) - 0.16).abs() < 1e-12);
        assert!(((SQRT_2 * p.omega_dt).sin().powi(2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn params_reject_out_of_range() {
        let err = GateParams::new(1.2, 0.1).unwrap_err();
        assert!(err.to_string().contains("p1"));
        let err = GateParams::new(0.1, -0.1).unwrap_err();
        assert!(err.to_string().contains("p2"));
        assert!(GateParams::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn unitary_is_identity_at_zero_branching() {
        let u = two_site_unitary(&GateParams::new(0.0, 0.4).unwrap());
        assert!(max_abs(&(u - identity(4))) < 1e-15);
    }

    #[test]
    fn unitary_fixes_empty_pair() {
        for p1 in [0.1, 0.5, 0.93, 1.0] {
            let u = two_site_unitary(&GateParams::new(p1, 0.0).unwrap());
            assert!((u[(0, 0)] - ONE).norm() < 1e-14);
            for r in 1..4 {
                assert!(u[(r, 0)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn branching_amplitude_matches_taylor_oracle() {
        // |<••|U|∘•>|² = p1/2; |∘•> = index 1, |••> = index 3
        for p1 in [0.25, 0.5, 1.0] {
            let params = GateParams::new(p1, 0.0).unwrap();
            let oracle = taylor_expm(&two_site_generator(), params.omega_dt);
            let u = two_site_unitary(&params);
            assert!(max_abs(&(&u - &oracle)) < 1e-13);
            assert!((oracle[(3, 1)].norm_sqr() - p1 / 2.0).abs() < 1e-12);
            assert!((u[(3, 1)].norm_sqr() - p1 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kraus_limits() {
        let (k0, k1) = kraus_pair(&GateParams::new(0.3, 0.0).unwrap());
        assert!(max_abs(&(k0 - identity(2))) < 1e-15);
        assert!(max_abs(&k1) < 1e-15);

        let (k0, k1) = kraus_pair(&GateParams::new(0.3, 1.0).unwrap());
        let empty_proj = mat(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!(max_abs(&(k0 - empty_proj)) < 1e-15);
        assert!(max_abs(&(k1 - sigma_minus() * I)) < 1e-15);
    }

    #[test]
    fn kraus_at_intermediate_decay() {
        let params = GateParams::new(0.0, 0.3).unwrap();
        let (k0, k1) = kraus_pair(&params);
        assert!((k0[(0, 0)] - ONE).norm() < 1e-15);
        assert!((k0[(1, 1)].re - 0.7_f64.sqrt()).abs() < 1e-15);
        assert!((k1[(0, 1)].norm() - 0.3_f64.sqrt()).abs() < 1e-15);
        assert!(LocalOperators::new(params).kraus_completeness_residual() < 1e-12);
    }

    #[test]
    fn kraus_operators_are_matrix_elements_of_d() {
        // K_m = <m| D |∘> on the partner site
        let params = GateParams::new(0.0, 0.37).unwrap();
        let d = dissipation_gate(&params);
        let (k0, k1) = kraus_pair(&params);
        assert!(max_abs(&(kraus_from_d(&d, 1) - k1)) < 1e-14);
        assert!(max_abs(&(kraus_from_d(&d, 0) - k0)) < 1e-14);
    }

    // <m|_partner D |∘>_partner with the partner as the first tensor factor
    fn kraus_from_d(d: &CMat, m: usize) -> CMat {
        let mut k = CMat::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                k[(a, b)] = d[(2 * m + a, b)];
            }
        }
        k
    }

    #[test]
    fn superop_limits() {
        let s = dissipation_superop(&GateParams::new(0.0, 0.0).unwrap());
        assert!(max_abs(&(s - identity(4))) < 1e-15);

        let s = dissipation_superop(&GateParams::new(0.0, 1.0).unwrap());
        let filled = nalgebra::DVector::from_row_slice(&[ZERO, ZERO, ZERO, ONE]);
        let out = &s * filled;
        assert!((out[0] - ONE).norm() < 1e-15);
        assert!(out.iter().skip(1).all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn superop_on_maximally_mixed_site() {
        let s = dissipation_superop(&GateParams::new(0.0, 0.5).unwrap());
        let mixed = nalgebra::DVector::from_row_slice(&[c(0.5, 0.0), ZERO, ZERO, c(0.5, 0.0)]);
        let out = &s * mixed;
        assert!((out[0] - c(0.75, 0.0)).norm() < 1e-15);
        assert!((out[3] - c(0.25, 0.0)).norm() < 1e-15);
        assert!(out[1].norm() < 1e-15 && out[2].norm() < 1e-15);
    }

    #[test]
    fn superop_preserves_trace_functional() {
        let s = dissipation_superop(&GateParams::new(0.2, 0.61).unwrap());
        let id = nalgebra::DVector::from_row_slice(&[ONE, ZERO, ZERO, ONE]);
        let left = s.adjoint() * &id;
        assert!(left.iter().zip(id.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn gate_without_branching_or_decay_is_swap() {
        let g = local_gate(&GateParams::new(0.0, 0.0).unwrap());
        let expected = kron(&identity(2), &swap());
        assert!(max_abs(&(g - expected)) < 1e-15);
    }

    #[test]
    fn gate_fixes_absorbing_configuration() {
        let g = local_gate(&GateParams::new(0.8, 0.3).unwrap());
        assert!((g[(0, 0)] - ONE).norm() < 1e-14);
        for r in 1..8 {
            assert!(g[(r, 0)].norm() < 1e-14);
        }
    }

    #[test]
    fn swap_commutes_with_dissipation_gate() {
        let params = GateParams::new(0.4, 0.77).unwrap();
        let d = dissipation_gate(&params);
        let sw = swap();
        assert!(max_abs(&(&sw * &d - &d * &sw)) < 1e-14);
    }

    #[test]
    fn small_angle_kraus_expansion() {
        for theta in [1e-3f64, 5e-4, 1e-4] {
            let p2 = theta.sin().powi(2);
            let (k0, _) = kraus_pair(&GateParams::new(0.0, p2).unwrap());
            let approx = identity(2) - number_op() * c(theta * theta / 2.0, 0.0);
            assert!(max_abs(&(k0 - approx)) <= theta.powi(4));
        }
    }

    #[test]
    fn doubled_gate_matches_vectorized_conjugation() {
        // vec(X ρ X†) on two sites equals (X ⊗ X̄) in interleaved order
        let params = GateParams::new(0.63, 0.1).unwrap();
        let u = two_site_unitary(&params);
        let w = doubled_two_site(&u);
        let rho = mat(
            4,
            4,
            &(0..16)
                .map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
                .collect::<Vec<_>>(),
        );
        let evolved = &u * &rho * dagger(&u);
        // interleaved vector: index (a1 b1 a2 b2) holds rho[(a1 a2),(b1 b2)]
        let interleave = |m: &CMat| {
            let mut v = nalgebra::DVector::<C64>::zeros(16);
            for s in 0..16 {
                let (a1, b1, a2, b2) = ((s >> 3) & 1, (s >> 2) & 1, (s >> 1) & 1, s & 1);
                v[s] = m[(2 * a1 + a2, 2 * b1 + b2)];
            }
            v
        };
        let out = &w * interleave(&rho);
        let expected = interleave(&evolved);
        assert!((out - expected).iter().all(|z| z.norm() < 1e-13));
        assert!(unitarity_residual(&w) < 1e-13);
    }
}
