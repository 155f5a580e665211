//! Candidate-area scoring and box dilation.
//!
//! A voter (the center of a grounded reference box) contributes a Gaussian
//! centrality score to every candidate area that contains it. Coordinates are
//! normalized to the candidate, so the score only depends on where the voter
//! sits relative to the candidate and not on the candidate's size.

use serde::{Deserialize, Serialize};

use super::boxes::{center, contains, fit_within, BBox, Point2};
use super::scalar::Scalar;
use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig<T: Scalar> {
    /// Gaussian width in normalized candidate units.
    pub sigma: T,
    /// Boxes overlapping a kept box above this IoU are suppressed.
    pub nms_iou_threshold: T,
}

impl<T: Scalar> Default for ScoreConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(0.3),
            nms_iou_threshold: T::lit(0.5),
        }
    }
}

impl<T: Scalar> ScoreConfig<T> {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(GeometryError::InvalidConfig(format!("sigma must be > 0, got {:?}", self.sigma)));
        }
        let t = self.nms_iou_threshold;
        if !(t > T::zero() && t <= T::one()) {
            return Err(GeometryError::InvalidConfig(format!(
                "nms_iou_threshold must lie in (0, 1], got {:?}",
                t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DilationConfig<T: Scalar> {
    /// Minimum side length of a dilated box, in pixels.
    pub min_size: T,
    /// Upper bound on dilated area / original area for boxes with positive area.
    pub max_ratio: T,
}

impl<T: Scalar> Default for DilationConfig<T> {
    fn default() -> Self {
        Self {
            min_size: T::lit(1024.0),
            max_ratio: T::lit(16.0),
        }
    }
}

impl<T: Scalar> DilationConfig<T> {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.min_size > T::zero()) {
            return Err(GeometryError::InvalidConfig(format!("min_size must be > 0, got {:?}", self.min_size)));
        }
        if !(self.max_ratio >= T::one()) {
            return Err(GeometryError::InvalidConfig(format!("max_ratio must be >= 1, got {:?}", self.max_ratio)));
        }
        Ok(())
    }
}

/// Centrality score of one voter center inside a candidate area, in `[0, 1]`.
///
/// Points outside the candidate (closed boundaries, same rule as
/// [`contains`]) score exactly zero. The candidate must have positive width
/// and height.
pub fn score_point_in_candidate<T: Scalar>(
    candidate: &BBox<T>,
    voter_center: Point2<T>,
    cfg: &ScoreConfig<T>,
) -> Result<T, GeometryError> {
    if candidate.is_degenerate() {
        return Err(GeometryError::DegenerateCandidate);
    }
    if !contains(candidate, voter_center) {
        return Ok(T::zero());
    }
    let xn = (voter_center.x - candidate.x1()) / candidate.width();
    let yn = (voter_center.y - candidate.y1()) / candidate.height();
    let dx = xn - T::half();
    let dy = yn - T::half();
    let two_sigma_sq = T::two() * cfg.sigma * cfg.sigma;
    Ok((-(dx * dx + dy * dy) / two_sigma_sq).exp())
}

/// Sum of centrality scores of every voter's center.
pub fn score_candidate<T: Scalar>(
    candidate: &BBox<T>,
    voters: &[BBox<T>],
    cfg: &ScoreConfig<T>,
) -> Result<T, GeometryError> {
    voters.iter().try_fold(T::zero(), |acc, v| {
        Ok(acc + score_point_in_candidate(candidate, center(v), cfg)?)
    })
}

/// Majority-vote alternative to centrality scoring: the number of voter
/// centers inside the candidate.
pub fn count_votes<T: Scalar>(candidate: &BBox<T>, voters: &[BBox<T>]) -> T {
    voters
        .iter()
        .filter(|v| contains(candidate, center(v)))
        .fold(T::zero(), |acc, _| acc + T::one())
}

/// Expands `b` so that each side is at least `min(min_size, bounds side)`,
/// growing symmetrically about its center and then shifting (never
/// shrinking) to fit inside `bounds`.
///
/// For boxes with positive area, growth stops at `max_ratio` times the
/// original area; the box keeps at least its original sides. Degenerate
/// boxes ignore the ratio cap. The result always contains `b ∩ bounds`.
pub fn dilate<T: Scalar>(
    b: &BBox<T>,
    cfg: &DilationConfig<T>,
    bounds: &BBox<T>,
) -> Result<BBox<T>, GeometryError> {
    if bounds.is_degenerate() {
        return Err(GeometryError::InvalidBox("dilation bounds have no area".into()));
    }
    let clipped = b.intersection(bounds).ok_or(GeometryError::OutsideBounds)?;
    let (w, h) = (clipped.width(), clipped.height());
    let mut tw = w.max(cfg.min_size.min(bounds.width()));
    let mut th = h.max(cfg.min_size.min(bounds.height()));

    if w > T::zero() && h > T::zero() {
        let cap = cfg.max_ratio * w * h;
        if tw * th > cap {
            let k = (cap / (tw * th)).sqrt();
            let (mut nw, mut nh) = (tw * k, th * k);
            if nw < w {
                nw = w;
                nh = (cap / w).min(th);
            } else if nh < h {
                nh = h;
                nw = (cap / h).min(tw);
            }
            tw = nw.max(w);
            th = nh.max(h);
        }
    }

    let grown = BBox::centered_at(center(&clipped), tw, th);
    let mut out = fit_within(&grown, bounds);
    // Rounding in the shift can nudge an edge by one ulp; re-cover the input.
    out = BBox::raw(
        out.x1().min(clipped.x1()),
        out.y1().min(clipped.y1()),
        out.x2().max(clipped.x2()),
        out.y2().max(clipped.y2()),
    );
    Ok(out)
}
