//! Box and point algebra in pixel space.
//!
//! Everything here is generic over the floating-point [`Scalar`] type and
//! free of side effects. The crate root re-exports `f64` aliases
//! ([`crate::PixelBox`], [`crate::Point`], [`crate::PixelViewport`]) that the
//! rest of the crate uses.

mod boxes;
mod nms;
mod scalar;
mod scoring;
mod viewport;

use thiserror::Error;

pub use boxes::{center, contains, fit_within, iou, BBox, Point2};
pub use nms::{nms, nms_indices};
pub use scalar::{round_half_away, Scalar};
pub use scoring::{
    count_votes, dilate, score_candidate, score_point_in_candidate, DilationConfig, ScoreConfig,
};
pub use viewport::{to_global, to_local, Viewport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid box {0}")]
    InvalidBox(String),
    #[error("candidate area has zero width or height; dilate it before scoring")]
    DegenerateCandidate,
    #[error("box lies outside the bounds")]
    OutsideBounds,
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
