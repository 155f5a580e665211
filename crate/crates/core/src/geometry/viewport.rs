use serde::{Deserialize, Serialize};

use super::boxes::{BBox, Point2};
use super::scalar::Scalar;
use super::GeometryError;

/// Placement of a cropped sub-image inside the original screenshot, in
/// absolute pixels of the original.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport<T: Scalar> {
    pub offset: Point2<T>,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Viewport<T> {
    /// Viewport covering a whole `width x height` image.
    pub fn full(width: T, height: T) -> Result<Self, GeometryError> {
        if !(width > T::zero() && height > T::zero()) {
            return Err(GeometryError::InvalidViewport(format!("size {:?}x{:?}", width, height)));
        }
        Ok(Self {
            offset: Point2::new(T::zero(), T::zero()),
            width,
            height,
        })
    }

    /// Viewport for `region` (global pixels), which must have positive size
    /// and lie within `parent`.
    pub fn within(region: &BBox<T>, parent: &BBox<T>) -> Result<Self, GeometryError> {
        if region.is_degenerate() {
            return Err(GeometryError::InvalidViewport(format!("empty region {:?}", region)));
        }
        if !parent.contains_box(region) {
            return Err(GeometryError::InvalidViewport(format!(
                "{:?} exceeds parent {:?}",
                region, parent
            )));
        }
        Ok(Self {
            offset: Point2::new(region.x1(), region.y1()),
            width: region.width(),
            height: region.height(),
        })
    }

    /// The viewport's extent in global coordinates.
    pub fn bounds(&self) -> BBox<T> {
        BBox::raw(
            self.offset.x,
            self.offset.y,
            self.offset.x + self.width,
            self.offset.y + self.height,
        )
    }

    /// The viewport's extent in its own local coordinates.
    pub fn local_bounds(&self) -> BBox<T> {
        BBox::raw(T::zero(), T::zero(), self.width, self.height)
    }

    pub fn max_side(&self) -> T {
        self.width.max(self.height)
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    pub fn point_to_global(&self, p: Point2<T>) -> Point2<T> {
        p.translate(self.offset.x, self.offset.y)
    }

    pub fn point_to_local(&self, p: Point2<T>) -> Point2<T> {
        p.translate(-self.offset.x, -self.offset.y)
    }

    /// Nested viewport: `child` is expressed in this viewport's local
    /// coordinates; the result is expressed globally.
    pub fn compose(&self, child: &Viewport<T>) -> Viewport<T> {
        Viewport {
            offset: self.point_to_global(child.offset),
            width: child.width,
            height: child.height,
        }
    }
}

/// Maps a box in the viewport's local coordinates to global coordinates.
pub fn to_global<T: Scalar>(v: &Viewport<T>, local: &BBox<T>) -> BBox<T> {
    local.translate(v.offset.x, v.offset.y)
}

/// Maps a global box into the viewport's local coordinates, clipping it to
/// the viewport. Fails when the box does not touch the viewport.
pub fn to_local<T: Scalar>(v: &Viewport<T>, global: &BBox<T>) -> Result<BBox<T>, GeometryError> {
    let clipped = global
        .intersection(&v.bounds())
        .ok_or(GeometryError::OutsideBounds)?;
    Ok(clipped.translate(-v.offset.x, -v.offset.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox<f64> {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn vp(x: f64, y: f64, w: f64, h: f64) -> Viewport<f64> {
        Viewport {
            offset: Point2::new(x, y),
            width: w,
            height: h,
        }
    }

    #[test]
    fn translation_examples() {
        let v = vp(100.0, 200.0, 500.0, 500.0);
        let g = to_global(&v, &b(10.0, 5.0, 20.0, 15.0));
        assert_eq!(g, b(110.0, 205.0, 120.0, 215.0));
        assert_eq!(to_local(&v, &g).unwrap(), b(10.0, 5.0, 20.0, 15.0));
        let id = vp(0.0, 0.0, 50.0, 50.0);
        assert_eq!(to_global(&id, &b(1.0, 2.0, 3.0, 4.0)), b(1.0, 2.0, 3.0, 4.0));
    }

    #[test]
    fn to_local_clips_and_rejects_disjoint() {
        let v = vp(100.0, 100.0, 50.0, 50.0);
        assert_eq!(to_local(&v, &b(90.0, 90.0, 110.0, 110.0)).unwrap(), b(0.0, 0.0, 10.0, 10.0));
        assert_eq!(to_local(&v, &b(0.0, 0.0, 10.0, 10.0)), Err(GeometryError::OutsideBounds));
    }

    #[test]
    fn within_checks_parent() {
        let parent = b(0.0, 0.0, 100.0, 100.0);
        assert!(Viewport::within(&b(10.0, 10.0, 50.0, 50.0), &parent).is_ok());
        assert!(Viewport::within(&b(10.0, 10.0, 150.0, 50.0), &parent).is_err());
        assert!(Viewport::within(&b(10.0, 10.0, 10.0, 50.0), &parent).is_err());
        assert!(Viewport::<f64>::full(0.0, 10.0).is_err());
    }

    #[test]
    fn nested_composition() {
        let outer = vp(100.0, 50.0, 400.0, 400.0);
        let inner = vp(20.0, 30.0, 100.0, 100.0);
        let composed = outer.compose(&inner);
        assert_eq!(composed, vp(120.0, 80.0, 100.0, 100.0));
        let local = b(1.0, 2.0, 3.0, 4.0);
        assert_eq!(to_global(&composed, &local), to_global(&outer, &to_global(&inner, &local)));
    }
}
