//! Coarse-to-fine GUI grounding.
//!
//! Given a high-resolution screenshot and a natural-language instruction,
//! find the pixel location of the target UI element. The crate provides a
//! planner-guided recursive visual search, three planner-free baselines
//! (iterative zooming, iterative narrowing, re-grounding), model backends
//! with record/replay cassettes, and a benchmark harness that reports
//! center-in-box accuracy per application, category and element type.

pub mod backends;
pub mod bench;
pub mod fixtures;
pub mod geometry;
pub mod planner;
pub mod search;

/// Point in absolute pixel coordinates.
pub type Point = geometry::Point2<f64>;
/// Rectangle in absolute pixel coordinates.
pub type PixelBox = geometry::BBox<f64>;
/// Crop placement in absolute pixel coordinates.
pub type PixelViewport = geometry::Viewport<f64>;
pub type ScoreConfig = geometry::ScoreConfig<f64>;
pub type DilationConfig = geometry::DilationConfig<f64>;
