use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Variants carry enough context to be
/// surfaced verbatim by the command-line front end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("model has no density (atomic law)")]
    NoDensity,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("quadrature did not reach tolerance (estimated error {error:.3e} after {intervals} intervals)")]
    QuadratureFailure { error: f64, intervals: usize },
    #[error("no sampler registered for this model: {0}")]
    UnsupportedSampler(String),
    #[error("rejection envelope violated at x = {x}: density ratio {ratio}")]
    EnvelopeViolation { x: f64, ratio: f64 },
    #[error("moment of order {order} diverges (critical exponent {critical})")]
    MomentDiverges { order: f64, critical: f64 },
    #[error("model has atoms; gradient of the support function may not exist")]
    AtomicModel,
    #[error("extension is not integrable: {0}")]
    NotIntegrable(String),
    #[error("density vanishes at {0}")]
    ZeroDensity(f64),
    #[error("exponential moment outside the strip: {0}")]
    MomentStripViolation(String),
    #[error("no sign change of g(alpha) in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("several roots of g(alpha): {roots:?}")]
    AmbiguousRoot { roots: Vec<f64> },
    #[error("matrix violates the pattern b_ij = b_ii/2 for numeraire {numeraire}: {detail}")]
    PatternViolation { numeraire: usize, detail: String },
    #[error("Lévy measure has infinite mass")]
    InfiniteActivity,
    #[error("strike geometry violated: {0}")]
    GeometryViolation(String),
    #[error("no indicator-free form for this payoff: {0}")]
    UnsupportedSimplification(String),
    #[error("symmetry prerequisite failed: {0}")]
    SymmetryPrereqFailed(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_index(index: usize, dim: usize) -> Result<()> {
    if index == 0 || index > dim {
        Err(Error::Index { index, dim })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_one_based() {
        assert_eq!(check_index(0, 2), Err(Error::Index { index: 0, dim: 2 }));
        assert!(check_index(1, 2).is_ok() && check_index(2, 2).is_ok());
        assert!(check_index(3, 2).is_err());
    }

    #[test]
    fn messages_carry_context() {
        assert_eq!(Error::Dimension { expected: 2, got: 3 }.to_string(), "dimension mismatch: expected 2, got 3");
        assert!(domain("x < 0").to_string().contains("x < 0"));
    }
}
