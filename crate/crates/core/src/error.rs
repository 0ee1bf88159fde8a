use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `mu * m(r) >= 1`: the wind is no longer a mild breeze and the Randers
    /// metric stops being positive definite.
    #[error("metric degenerates at r = {r}: mu * m(r) = {mu_m} >= 1")]
    MetricDegenerate { r: f64, mu_m: f64 },

    #[error("polar chart is singular at the vertex (r = 0)")]
    VertexSingular,

    #[error("numerical blow-up at s = {s}: {reason}")]
    NumericalBlowup { s: f64, reason: String },

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("no root within search horizon {horizon}")]
    SearchHorizon { horizon: f64 },

    /// No conjugate point was found before the horizon; `lower_bound` is a
    /// certified lower bound on the conjugate parameter.
    #[error("no conjugate point up to s = {lower_bound}")]
    ConjugateHorizon { lower_bound: f64 },

    #[error("surface is not embeddable: |m'(r)| = {m1_abs} > 1 at r = {r}")]
    NotEmbeddable { r: f64, m1_abs: f64 },

    #[error("point lies outside the Minkowski cylinder: x^2 + y^2 = {rho2}, bound {bound}")]
    OutsideCylinder { rho2: f64, bound: f64 },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
