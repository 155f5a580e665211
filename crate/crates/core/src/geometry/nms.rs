use std::cmp::Ordering;

use super::boxes::{iou, BBox};
use super::scalar::Scalar;

/// Indices of the boxes kept by greedy NMS, in visit order: score
/// descending, ties broken by input order.
pub fn nms_indices<T: Scalar>(scored: &[(BBox<T>, T)], iou_threshold: T) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    // Stable sort keeps earlier inputs first among equal scores.
    order.sort_by(|&a, &b| scored[b].1.partial_cmp(&scored[a].1).unwrap_or(Ordering::Equal));

    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&k| iou(&scored[k].0, &scored[i].0) > iou_threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Greedy non-maximum suppression.
///
/// Repeatedly keeps the highest-scoring remaining box and drops every
/// remaining box whose IoU with it exceeds `iou_threshold`.
pub fn nms<T: Scalar>(scored: &[(BBox<T>, T)], iou_threshold: T) -> Vec<(BBox<T>, T)> {
    nms_indices(scored, iou_threshold)
        .into_iter()
        .map(|i| scored[i])
        .collect()
}
