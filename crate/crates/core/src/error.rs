use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric residual {residual:e})")]
    NonSkew { residual: f64 },

    #[error("matrix is not a rotation (orthonormality residual {ortho:e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },

    #[error("rotation angle {angle} rad is within the logarithm cut near pi; use a smaller error angle")]
    NearPiSingularity { angle: f64 },

    #[error("position radius {radius} m is below the central-body floor")]
    DegeneratePosition { radius: f64 },

    #[error("orthonormality drift {drift:e} exceeded the limit at t = {t} s; reduce the step size")]
    DriftExceeded { t: f64, drift: f64 },

    #[error("internal mismatch in {what}: residual {residual:e}")]
    InternalMismatch { what: &'static str, residual: f64 },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unsupported trajectory: {0}")]
    UnsupportedSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
