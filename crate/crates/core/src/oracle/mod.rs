//! Exact reference solutions used to verify the cumulant solvers.
//!
//! Two independent references are provided: closed-form steady-state moments
//! of the coherently driven Kerr oscillator from its complex-P phase-space
//! distribution, and direct Fock-space master-equation steady states for one-
//! and two-mode chains. They cross-check each other where both apply.

mod complex_p;
mod fock;

pub use complex_p::{classical_kerr_occupations, complexp_moment, KerrParams};
pub use fock::{fock_qcb, gaussian_state_fock, FockChain, FockState, QcbOutcome};
