//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the bundle laboratory.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("torus modulus must have Im(tau) > 0, got Im = {0}")]
    NonPositiveModulus(f64),

    #[error("grid size {0} rejected: spectral differentiation needs an even grid_n >= 8")]
    BadGrid(usize),

    #[error("field has bidegree {found}, operation needs {needed}")]
    WrongBidegree { needed: &'static str, found: &'static str },

    #[error("derivative would leave the bidegree lattice {{(0,0),(1,0),(0,1),(1,1)}} from {0}")]
    BidegreeOverflow(&'static str),

    #[error("Poisson compatibility violated: |mean of rhs| = {0:.3e} exceeds tolerance")]
    NonZeroMean(f64),

    #[error("field shapes disagree: {0}")]
    ShapeMismatch(String),

    #[error("operands live on different bundles: {0}")]
    BundleMismatch(String),

    #[error("twists disagree: epsilon {0} vs {1}")]
    TwistMismatch(num_complex::Complex64, num_complex::Complex64),

    #[error("unsupported preset parameters: {0}")]
    UnsupportedParams(String),

    #[error("field is not Hermitian for the given metric (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("spectrum outside the domain of the requested function: {0}")]
    SpectrumOutOfDomain(String),

    #[error("endomorphism field is singular at a grid point (|det| = {0:.3e})")]
    Singular(f64),

    #[error("metric is degenerate: minimum eigenvalue {0:.3e} at a grid point")]
    DegenerateMetric(f64),

    #[error("field violates automorphy covariance: seam residual {0:.3e}")]
    CovarianceViolation(f64),

    #[error("inclusion is not pointwise injective (min singular value {0:.3e})")]
    NotInjective(f64),

    #[error("bundle declares no stability witnesses")]
    NoWitnesses,

    #[error("metric is not weak Hermite-Einstein: |K - (Tr K / r) id| sup = {0:.3e}")]
    NotWeakHE(f64),

    #[error("flow step rejected: {0}")]
    StepRejected(String),

    #[error("flow stalled: step size collapsed below 1e-12 at t = {0}")]
    StallDetected(f64),

    #[error("spectral gap {0:.3e} too small to extract a destabilizing projector")]
    SpectralGapTooSmall(f64),

    #[error("chern form degree {k} out of range 1..={r}")]
    BadDegree { k: usize, r: usize },
}
