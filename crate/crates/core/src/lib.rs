//! Effective degenerate-parametric-oscillator model of a multimode
//! optomechanical system.
//!
//! The crate goes from raw system parameters ([`normal_modes`]) to the reduced
//! two-mode driven model, its classical and Gaussian semiclassical probe
//! response ([`semiclassical`]), exact two-mode Lindblad steady states in a
//! displaced truncated Fock basis ([`lindblad`]) and Wigner functions of the
//! reduced states ([`wigner`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
mod krylov;
pub mod lindblad;
pub mod normal_modes;
pub mod semiclassical;
pub mod wigner;

pub use num_complex;

/// Double-precision complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub use error::{Error, Result};
pub use fock::{
    annihilation_op, expectation_value, partial_trace, shifted_op, tensor_product, DensityMatrix,
    Operator, SparseMatrix,
};
pub use lindblad::{
    build_hamiltonian, build_liouvillian, converge_truncation, observables, steady_state,
    Displacement, Liouvillian, Observables, SteadyState, SteadyStateOptions, TruncationOptions,
};
pub use normal_modes::{
    build_dpo_model, check_validity, cooling_prediction, derive_normal_modes, planck_occupation,
    Bath, CoolingModel, DiagnosticsReport, NormalModeData, PhysicalParams, Probe,
};
pub use semiclassical::{
    analytic_b, classical_response, g2_gaussian, solve_self_consistency, sweep, DpoModel,
    SemiclassicalSolution, SolverOptions, SweepAxis,
};
pub use wigner::{summarize, wigner, GridSpec, WignerGrid, WignerSummary};
