//! Small dense complex linear-algebra helpers shared by the evolvers.
//!
//! Qubit registers are addressed with position 0 as the most significant bit
//! of the basis index, so a register of `n` qubits has basis index
//! `b_0 b_1 ... b_{n-1}` read as a binary number.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Build a matrix from row-major entries.
pub fn mat(rows: usize, cols: usize, entries: &[C64]) -> CMat {
    assert_eq!(entries.len(), rows * cols);
    CMat::from_row_slice(rows, cols, entries)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Kronecker product `a ⊗ b`, with `a` on the more significant qubits.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |X†X - I|`, zero for an exactly unitary matrix.
pub fn unitarity_residual(a: &CMat) -> f64 {
    let n = a.ncols();
    max_abs(&(a.adjoint() * a - identity(n)))
}

/// `exp(-i t H)` for Hermitian `H`, computed from its eigendecomposition.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let eig = SymmetricEigen::new(h.clone());
    let phases = CMat::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -t * e)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Apply a `2^k × 2^k` operator to the qubits at `positions` of an `n`-qubit
/// amplitude vector, in place. `positions[0]` is the most significant qubit
/// of the operator's own index.
pub fn apply_gate(state: &mut [C64], n: usize, gate: &CMat, positions: &[usize]) {
    let k = positions.len();
    let sub = 1usize << k;
    debug_assert_eq!(state.len(), 1usize << n);
    debug_assert_eq!(gate.nrows(), sub);
    debug_assert!(positions.iter().all(|&p| p < n));

    let masks: Vec<usize> = positions.iter().map(|&p| 1usize << (n - 1 - p)).collect();
    let gate_mask: usize = masks.iter().sum();
    // offsets[j] = basis offset of local index j
    let offsets: Vec<usize> = (0..sub)
        .map(|j| {
            masks
                .iter()
                .enumerate()
                .filter(|(bit, _)| j & (1 << (k - 1 - bit)) != 0)
                .map(|(_, m)| m)
                .sum()
        })
        .collect();
    let g: Vec<C64> = (0..sub)
        .flat_map(|r| (0..sub).map(move |col| (r, col)))
        .map(|(r, col)| gate[(r, col)])
        .collect();

    let mut buf = vec![ZERO; sub];
    for base in 0..state.len() {
        if base & gate_mask != 0 {
            continue;
        }
        for (j, off) in offsets.iter().enumerate() {
            buf[j] = state[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let row = &g[r * sub..(r + 1) * sub];
            state[base + off] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense matrix of an operator acting on `positions` of an `n`-qubit register.
pub fn embed(n: usize, gate: &CMat, positions: &[usize]) -> CMat {
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    let mut col = vec![ZERO; dim];
    for j in 0..dim {
        col.iter_mut().for_each(|z| *z = ZERO);
        col[j] = ONE;
        apply_gate(&mut col, n, gate, positions);
        for (i, z) in col.iter().enumerate() {
            out[(i, j)] = *z;
        }
    }
    out
}
