use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter record violates one of its invariants. `field` names the
    /// invariant (e.g. `normalization`, `delta_k_d`).
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("frequency grid: {0}")]
    Grid(String),

    #[error("band collapse: {0}")]
    BandCollapse(String),

    #[error("divergent band edge at qd = {q_d} (cotangent pole)")]
    DivergentBandEdge { q_d: f64 },

    #[error("no root of the {band} band at detuning {delta} inside its bracket")]
    NoRootInBracket { band: &'static str, delta: f64 },

    #[error("self-consistent dispersion did not converge (last residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("degenerate closed form for the relative momentum (numerator {numerator:e}, denominator {denominator:e})")]
    DegenerateDenominator { numerator: f64, denominator: f64 },

    #[error("singular two-polariton system (determinant {determinant:e})")]
    SingularSystem { determinant: f64 },

    #[error("insufficient grid coverage: captured mass fraction {captured:.9}")]
    InsufficientCoverage { captured: f64 },

    #[error("fidelity is not single-peaked in the bandwidth bracket; samples: {samples:?}")]
    NonUnimodal { samples: Vec<(f64, f64)> },

    #[error("power-law fit: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
