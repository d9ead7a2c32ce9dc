use thiserror::Error;

/// Errors produced by the spectral pipeline and its numerical subsystems.
///
/// Programmer-level contract violations (mismatched truncation orders,
/// composing with a nonzero constant term, out-of-range indices) panic
/// instead; the variants here are data-dependent failures a caller can
/// meaningfully react to.
#[derive(Debug, Error)]
pub enum Error {
    /// Series reversion needs a zero constant term and a nonzero linear term.
    #[error("series reversion is singular: linear coefficient {0:e} too close to zero")]
    SingularReversion(f64),

    /// Reciprocal (or division) of a series with vanishing constant term.
    #[error("series reciprocal undefined: constant term {0:e} too close to zero")]
    ZeroConstantTerm(f64),

    /// Fractional power of a series whose constant term is not positive.
    #[error("fractional power branch point: constant term {0:e} is not positive")]
    BranchPoint(f64),

    /// A point fell outside the map domain or a branch image.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iteration failed to reach its tolerance within its cap.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Matrix or table dimensions do not satisfy an operation's contract.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// No root of the spectral determinant in the scanned interval.
    #[error("root not found: {0}")]
    RootNotFound(String),

    /// The determinant has a (near-)double root; the expansion degenerates.
    #[error("degenerate determinant root: |dD/dz| = {0:e} at z0")]
    DegenerateRoot(f64),

    /// A quadrature did not pass its refinement check.
    #[error("quadrature accuracy failure: {0}")]
    Accuracy(String),

    /// Monomial-basis matrices above this size are too ill-conditioned in
    /// double precision to be trusted; refuse instead of degrading silently.
    #[error("matrix size {0} exceeds the conditioning cap of {1}")]
    SizeTooLarge(usize, usize),

    /// An invalid run configuration (failed validation or unparsable file).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Noise kernel moment table violating a required normalization.
    #[error("invalid noise kernel: {0}")]
    InvalidKernel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
