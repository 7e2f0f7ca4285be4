//! Numerical laboratory for twisted holomorphic vector bundles on a flat
//! complex torus X = C/(Z + τZ).
//!
//! The torus is covered by the two lattice generators 1 and τ, and bundles
//! are given by projective factors of automorphy: a pair of multiplier
//! matrices a_1(z), a_τ(z) with
//!
//!   a_τ(z+1) a_1(z) = ε · a_1(z+τ) a_τ(z),   |ε| = 1.
//!
//! The phase ε is the twist; a constant purely imaginary (1,1)-form
//! B = i·b·σ_g makes the curvature R̃ = R − B·id of any connection a global
//! End(E)-valued form. On top of this the crate provides
//!
//! - Hermitian metrics, the endomorphism dictionary f^{h,v}, functional
//!   calculus, gauge action and geodesics on the space of metrics,
//! - Chern connections and B-corrected curvature, mean curvature
//!   K_g = iΛ_g R̃, Chern forms, degree / slope / Einstein constant,
//! - sub-bundles with induced metrics, second fundamental forms and the
//!   twisted Gauss-Codazzi equations,
//! - the Donaldson Lagrangian (path and closed evaluators), the perturbed
//!   equation L_ε = 0, and the downward gradient flow
//!   ∂_t h = −(K̂_g − c_g·h) with monotonicity diagnostics.
//!
//! Everything is discretized on an N×N periodic grid with spectral (FFT)
//! differentiation; metrics are stored relative to an analytic reference
//! metric so that all transforms act on strictly periodic fields.

pub mod bundle;
pub mod chern;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod metric;
pub mod subobjects;
pub mod twist;

pub use error::CoreError;
pub use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
