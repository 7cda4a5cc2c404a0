//! Functional Hodrick-Prescott filtering for Hilbert-space-valued data.
//!
//! The observation model is `x = y + u`, `A y = v` with a compact operator
//! `A: H1 -> H2` and independent Gaussian noises `u`, `v`. Everything is
//! expressed in the singular system of `A`, truncated at `N` directions:
//!
//! - [`spectral`]: singular systems, elements, diagonal operators, projectors.
//! - [`gaussian`]: the stochastic model, admissibility checks, sampling and
//!   the conditional expectation `E[y|x]`.
//! - [`filter`]: the penalized functional, its minimizer, the optimal
//!   smoothing operator and the classical finite-dimensional filter.
//! - [`scale`]: the Hilbert-scale extension for white-noise covariances.
//! - [`heat`]: the backward heat conduction example.

pub mod error;
pub mod filter;
pub mod gaussian;
pub mod heat;
pub mod scale;
pub mod sequence;
pub mod spectral;

pub use error::{Error, Result};
pub use filter::{
    candidate_family, classical_hp, evaluate_jb, minimize, optimal_b, residual, residual_covariance, verify_optimality,
    OptimalityReport, SecondDifferenceBasis,
};
pub use gaussian::{
    check_admissibility, compute_qv, conditional_expectation, sample_pair, sample_pair_indexed, AdmissibilityReport,
    DiagonalCovariance, ModelSpec,
};
pub use heat::{build_heat_system, run_heat_filter, synthesize_grid, HeatProblem};
pub use scale::{
    check_hs_tilde, conditional_expectation_scale, extend_model, fractional_power, optimal_b_scale, scale_norm,
    ScaleModel,
};
pub use sequence::{Decay, Decision, FamilyKind, SequenceFamily, SeriesCheck};
pub use spectral::{
    apply_adjoint, apply_forward, inner, project_kernel, project_pi, solve_min_norm, DiagonalOperator, HilbertElement,
    SingularSystem, Space,
};
