//! Simulation and analysis toolkit for dissipative (1+1)D quantum cellular
//! automata.
//!
//! The reduced dynamics of one row of `L` two-level sites is available through
//! three routes that agree where they overlap:
//!
//! * [`dense`]: exact density-matrix evolution, with a Kraus-sum backend and
//!   an independent two-row ancilla-trace backend;
//! * [`mps`]: truncated evolution of the vectorized density matrix as a
//!   matrix-product state;
//! * [`meanfield`]: the translation-invariant product-state closure.
//!
//! [`lindblad`] integrates the continuous-time quantum contact process for
//! comparison with the small-step limit, and [`criticality`] estimates critical
//! points and decay exponents from density time series.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criticality;
pub mod dense;
pub mod error;
pub mod gates;
pub mod lindblad;
pub mod linalg;
pub mod meanfield;
pub mod mps;
pub mod series;

pub use error::{QcaError, Result};
pub use gates::{GateParams, LocalOperators};
pub use series::{ObservableSet, TimeSeries};
