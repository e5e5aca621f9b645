use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, labels or index sets that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A numerical routine failed or was handed non-finite data.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Required physical inputs are missing.
    #[error("configuration error: missing {}", .missing.join(", "))]
    Configuration { missing: Vec<String> },

    /// The drift matrix has an eigenvalue with non-negative real part.
    #[error("unstable linear dynamics: max Re(eigenvalue) = {max_real_part:e} rad/s")]
    Unstable { max_real_part: f64 },

    /// The semiclassical fixed point could not be located.
    #[error("steady state did not converge (last residual {residual:e})")]
    NonConvergence { residual: f64 },

    /// Adaptive quadrature exhausted its panel budget.
    #[error("quadrature did not reach tolerance {requested:e}: achieved {achieved:e} after {panels} panels")]
    Quadrature {
        requested: f64,
        achieved: f64,
        panels: usize,
    },

    /// The measured-quadrature covariance of the Bell measurement is singular.
    #[error("degenerate Bell measurement: det Γ = {det:e} (scale {scale:e})")]
    MeasurementDegenerate { det: f64, scale: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
