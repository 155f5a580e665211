//! Planner-free strategies.

use super::{Action, Context, StepPayload, Termination};
use crate::backends::ImagePayload;
use crate::geometry::{fit_within, round_half_away};
use crate::{PixelBox, Point};

/// The four quadrants of `b` in row-major order. The split is at the
/// floor of the half width and height, so integer boxes stay integral.
pub fn quadrants(b: &PixelBox) -> [PixelBox; 4] {
    let xm = b.x1() + (b.width() / 2.0).floor();
    let ym = b.y1() + (b.height() / 2.0).floor();
    let q = |x1, y1, x2, y2| PixelBox::new(x1, y1, x2, y2).expect("ordered quadrant");
    [
        q(b.x1(), b.y1(), xm, ym),
        q(xm, b.y1(), b.x2(), ym),
        q(b.x1(), ym, xm, b.y2()),
        q(xm, ym, b.x2(), b.y2()),
    ]
}

/// The quadrant of `b` holding `p`; boundary points go to the first quadrant
/// in row-major order that contains them.
pub fn quadrant_for(b: &PixelBox, p: Point) -> PixelBox {
    let qs = quadrants(b);
    qs.iter()
        .copied()
        .find(|q| q.contains_point(p))
        .unwrap_or_else(|| {
            // Points outside `b` go to the nearest quadrant.
            let c = Point::new(p.x.clamp(b.x1(), b.x2()), p.y.clamp(b.y1(), b.y2()));
            *qs.iter().find(|q| q.contains_point(c)).expect("clamped point lies in a quadrant")
        })
}

/// A `width × height` box centered on `p` (origin rounded to whole pixels),
/// shifted to fit inside `bounds`. Sides larger than `bounds` are clipped to it.
pub fn centered_crop(p: Point, width: f64, height: f64, bounds: &PixelBox) -> PixelBox {
    let w = width.min(bounds.width());
    let h = height.min(bounds.height());
    let x1 = round_half_away(p.x - w / 2.0);
    let y1 = round_half_away(p.y - h / 2.0);
    let want = PixelBox::new(x1, y1, x1 + w, y1 + h).expect("non-negative crop size");
    fit_within(&want, bounds)
}

/// Next patch of iterative narrowing: half the current width and height,
/// centered on the prediction.
pub fn narrow_patch(patch: &PixelBox, p: Point) -> PixelBox {
    let w = (patch.width() / 2.0).floor().max(1.0);
    let h = (patch.height() / 2.0).floor().max(1.0);
    centered_crop(p, w, h, patch)
}

/// Square re-grounding crop of side `size` around `p`, clipped to the image
/// extent where the image is smaller.
pub fn reground_crop(image: &PixelBox, p: Point, size: f64) -> PixelBox {
    centered_crop(p, size, size, image)
}

pub(super) fn direct(cx: &mut Context<'_>) -> (Point, Termination) {
    let image = cx.task.image;
    let instruction = cx.task.instruction;
    match cx.ground(instruction, image) {
        Ok(out) => {
            let payload = cx.ground_payload(instruction, image, &out);
            cx.rec.push(0, image.viewport(), Action::DirectGround, payload);
            (out.prediction, Termination::DepthExhausted)
        }
        Err(e) => {
            cx.record_failure(0, image, "direct grounding failed", &e);
            cx.sentinel()
        }
    }
}

/// Shared loop of zooming and narrowing: ground, choose the next patch,
/// repeat. A failed call stops the descent and keeps the last prediction.
fn iterate(cx: &mut Context<'_>, next: fn(&PixelBox, Point) -> PixelBox) -> (Point, Termination) {
    let instruction = cx.task.instruction;
    let mut patch: ImagePayload = cx.task.image.clone();
    let mut last: Option<Point> = None;
    let iterations = cx.cfg.iterations;
    for it in 0..iterations {
        let out = match cx.ground(instruction, &patch) {
            Ok(out) => out,
            Err(e) => {
                cx.record_failure(it, &patch, "grounding failed; keeping the previous prediction", &e);
                break;
            }
        };
        let payload = cx.ground_payload(instruction, &patch, &out);
        cx.rec.push(it, patch.viewport(), Action::DirectGround, payload);
        last = Some(out.prediction);
        if it + 1 == iterations {
            break;
        }
        let child = next(&patch.viewport().bounds(), out.prediction);
        cx.rec.push(
            it,
            patch.viewport(),
            Action::Descend,
            StepPayload {
                boxes: vec![child],
                ..Default::default()
            },
        );
        match patch.crop(&child) {
            Ok(c) => patch = c,
            Err(e) => {
                cx.record_failure(it, &patch, "crop failed", &e);
                break;
            }
        }
    }
    match last {
        Some(p) => (p, Termination::DepthExhausted),
        None => cx.sentinel(),
    }
}

pub(super) fn zoom(cx: &mut Context<'_>) -> (Point, Termination) {
    iterate(cx, quadrant_for)
}

pub(super) fn narrow(cx: &mut Context<'_>) -> (Point, Termination) {
    iterate(cx, narrow_patch)
}

pub(super) fn reground(cx: &mut Context<'_>, crop_size: f64) -> (Point, Termination) {
    let image = cx.task.image;
    let instruction = cx.task.instruction;
    let first = match cx.ground(instruction, image) {
        Ok(out) => out,
        Err(e) => {
            cx.record_failure(0, image, "first grounding failed", &e);
            return cx.sentinel();
        }
    };
    let payload = cx.ground_payload(instruction, image, &first);
    cx.rec.push(0, image.viewport(), Action::DirectGround, payload);

    let region = reground_crop(&image.viewport().bounds(), first.prediction, crop_size);
    cx.rec.push(
        0,
        image.viewport(),
        Action::Descend,
        StepPayload {
            boxes: vec![region],
            ..Default::default()
        },
    );
    let crop = match image.crop(&region) {
        Ok(c) => c,
        Err(e) => {
            cx.record_failure(0, image, "crop failed; keeping the first prediction", &e);
            return (first.prediction, Termination::DepthExhausted);
        }
    };
    match cx.ground(instruction, &crop) {
        Ok(out) => {
            let payload = cx.ground_payload(instruction, &crop, &out);
            cx.rec.push(1, crop.viewport(), Action::DirectGround, payload);
            (out.prediction, Termination::DepthExhausted)
        }
        Err(e) => {
            cx.record_failure(1, &crop, "second grounding failed; keeping the first prediction", &e);
            (first.prediction, Termination::DepthExhausted)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> PixelBox {
        PixelBox::new(x1, y1, x2, y2).unwrap()
    }

    fn tuple(b: PixelBox) -> (f64, f64, f64, f64) {
        (b.x1(), b.y1(), b.x2(), b.y2())
    }

    #[test]
    fn quadrant_membership() {
        let img = b(0.0, 0.0, 1000.0, 1000.0);
        assert_eq!(tuple(quadrant_for(&img, Point::new(300.0, 700.0))), (0.0, 500.0, 500.0, 1000.0));
        assert_eq!(tuple(quadrant_for(&img, Point::new(500.0, 500.0))), (0.0, 0.0, 500.0, 500.0));
        assert_eq!(tuple(quadrant_for(&img, Point::new(501.0, 500.0))), (500.0, 0.0, 1000.0, 500.0));
    }

    #[test]
    fn odd_sizes_split_on_integers() {
        let qs = quadrants(&b(10.0, 20.0, 17.0, 25.0));
        assert_eq!(tuple(qs[0]), (10.0, 20.0, 13.0, 22.0));
        assert_eq!(tuple(qs[3]), (13.0, 22.0, 17.0, 25.0));
    }

    #[test]
    fn narrow_examples() {
        let patch = b(0.0, 0.0, 2000.0, 1000.0);
        assert_eq!(tuple(narrow_patch(&patch, Point::new(1000.0, 500.0))), (500.0, 250.0, 1500.0, 750.0));
        assert_eq!(tuple(narrow_patch(&patch, Point::new(10.0, 10.0))), (0.0, 0.0, 1000.0, 500.0));
    }

    #[test]
    fn reground_examples() {
        let img = b(0.0, 0.0, 4000.0, 2000.0);
        assert_eq!(tuple(reground_crop(&img, Point::new(100.0, 100.0), 1024.0)), (0.0, 0.0, 1024.0, 1024.0));
        assert_eq!(
            tuple(reground_crop(&img, Point::new(2000.0, 1000.0), 1024.0)),
            (1488.0, 488.0, 2512.0, 1512.0)
        );
        let small = b(0.0, 0.0, 800.0, 600.0);
        assert_eq!(tuple(reground_crop(&small, Point::new(700.0, 10.0), 1024.0)), (0.0, 0.0, 800.0, 600.0));
    }
}
