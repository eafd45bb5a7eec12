use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("material error: {0}")]
    Material(String),

    #[error("degenerate curvature at x1 = {x1}: supply an explicit frame for curves with vanishing curvature")]
    DegenerateCurvature { x1: f64 },

    /// Thickness outside the regime where the tube map is invertible, or a
    /// deformation gradient lost positivity.
    #[error("geometry regime error: {0}")]
    GeometryRegime(String),

    #[error("incompatible loads for free boundary: {0}")]
    IncompatibleLoads(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
