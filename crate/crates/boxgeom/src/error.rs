//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors raised by geometry, preprocessing and evaluation operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("lines are parallel (angular difference below 1e-9 rad)")]
    ParallelLines,

    #[error("degenerate quad: {0}")]
    DegenerateQuad(String),

    #[error("homography is singular")]
    SingularHomography,

    #[error("degenerate face: {0}")]
    DegenerateFace(String),

    #[error("degenerate silhouette: {0}")]
    DegenerateSilhouette(String),

    #[error("ambiguous assembly: directions {0:.2}° apart (need > 5°)")]
    AmbiguousAssembly(f64),

    #[error("vanishing points not in orthogonal configuration (dot product {0} >= 0)")]
    NonOrthogonalConfiguration(f64),

    #[error("empty contour: only {0} rays survived (need >= 8)")]
    EmptyContour(usize),

    #[error("angle {0}° outside [-90, 90)")]
    OutOfRange(f64),

    #[error("vanishing point within 1 px of the 2D bbox center")]
    VPAtCenter,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing prediction for record {0}")]
    MissingPrediction(String),

    #[error("zero feature vector for record {0}: cosine distance undefined")]
    ZeroVector(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
