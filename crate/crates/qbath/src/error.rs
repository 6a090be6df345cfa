//! Error type shared by all modules of the crate.

/// Everything that can go wrong in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature exhausted its evaluation budget before reaching
    /// the requested tolerance. Carries the error estimate actually achieved.
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Convergence { achieved: f64, requested: f64 },

    /// `<q^2><p^2>` fell below the Heisenberg bound; signals an upstream
    /// numerical failure, not a physical state.
    #[error("uncertainty violation: q2*p2 = {product:.6e} < hbar^2/4 = {bound:.6e}")]
    UncertaintyViolation { product: f64, bound: f64 },

    /// An internal consistency check failed (non-positive eigenvalue,
    /// root located inside the continuum, threshold channel, ...).
    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    /// The scattering denominator |R|^2 + |Z|^2 vanished.
    #[error("resonance-singular scattering denominator")]
    ResonanceSingular,

    /// Channel sums did not settle within the truncation budget.
    #[error("channel sums not converged: tail estimate {tail_estimate:.3e}")]
    Truncation { tail_estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
