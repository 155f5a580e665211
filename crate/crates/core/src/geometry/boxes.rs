use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::GeometryError;

/// A point in pixel space (x grows right, y grows down).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point2<T: Scalar> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rounds both coordinates half away from zero.
    pub fn rounded(&self) -> Self {
        Self::new(self.x.round(), self.y.round())
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl<T: Scalar> From<[T; 2]> for Point2<T> {
    fn from(v: [T; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl<T: Scalar> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `(x1, y1, x2, y2)` with `x1 <= x2` and `y1 <= y2`.
///
/// Zero-width or zero-height boxes are valid values; they show up whenever a
/// grounder answers with a point instead of a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[T; 4]", into = "[T; 4]")]
pub struct BBox<T: Scalar> {
    x1: T,
    y1: T,
    x2: T,
    y2: T,
}

impl<T: Scalar> TryFrom<[T; 4]> for BBox<T> {
    type Error = GeometryError;

    fn try_from(v: [T; 4]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl<T: Scalar> From<BBox<T>> for [T; 4] {
    fn from(b: BBox<T>) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl<T: Scalar> BBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self, GeometryError> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x1 > x2 || y1 > y2 {
            return Err(GeometryError::InvalidBox(format!(
                "({:?}, {:?}, {:?}, {:?})",
                x1, y1, x2, y2
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Box with the given top-left corner and size.
    pub fn from_origin_size(x: T, y: T, width: T, height: T) -> Result<Self, GeometryError> {
        Self::new(x, y, x + width, y + height)
    }

    /// Zero-area box located at `p`.
    pub fn at_point(p: Point2<T>) -> Self {
        Self {
            x1: p.x,
            y1: p.y,
            x2: p.x,
            y2: p.y,
        }
    }

    // Callers guarantee ordering.
    pub(crate) fn raw(x1: T, y1: T, x2: T, y2: T) -> Self {
        debug_assert!(x1 <= x2 && y1 <= y2, "raw box out of order");
        Self { x1, y1, x2, y2 }
    }

    pub fn x1(&self) -> T {
        self.x1
    }
    pub fn y1(&self) -> T {
        self.y1
    }
    pub fn x2(&self) -> T {
        self.x2
    }
    pub fn y2(&self) -> T {
        self.y2
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn max_side(&self) -> T {
        self.width().max(self.height())
    }

    pub fn is_degenerate(&self) -> bool {
        self.width() <= T::zero() || self.height() <= T::zero()
    }

    pub fn center(&self) -> Point2<T> {
        center(self)
    }

    pub fn contains_point(&self, p: Point2<T>) -> bool {
        contains(self, p)
    }

    /// True if `other` lies entirely inside `self` (closed boundaries).
    pub fn contains_box(&self, other: &BBox<T>) -> bool {
        other.x1 >= self.x1 && other.y1 >= self.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    /// Closed-interval intersection; `None` when the boxes do not touch.
    pub fn intersection(&self, other: &BBox<T>) -> Option<BBox<T>> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 <= x2 && y1 <= y2).then(|| Self::raw(x1, y1, x2, y2))
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self::raw(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Applies `v -> scale * v + (dx, dy)`; `scale` must be positive.
    pub fn scale_translate(&self, scale: T, dx: T, dy: T) -> Self {
        Self::raw(
            self.x1 * scale + dx,
            self.y1 * scale + dy,
            self.x2 * scale + dx,
            self.y2 * scale + dy,
        )
    }

    /// Box of the given size centered on `c`, not yet fitted anywhere.
    pub fn centered_at(c: Point2<T>, width: T, height: T) -> Self {
        let hw = width * T::half();
        let hh = height * T::half();
        Self::raw(c.x - hw, c.y - hh, c.x - hw + width, c.y - hh + height)
    }

    /// Smallest box on the integer grid that contains `self`.
    pub fn snap_outward(&self) -> Self {
        Self::raw(self.x1.floor(), self.y1.floor(), self.x2.ceil(), self.y2.ceil())
    }

    pub fn cast<U: Scalar>(&self) -> BBox<U> {
        let c = |v: T| U::from_f64(v.to_f64().unwrap_or(0.0)).unwrap_or_else(U::zero);
        BBox::raw(c(self.x1), c(self.y1), c(self.x2), c(self.y2))
    }
}

/// Midpoint of the box. No rounding.
pub fn center<T: Scalar>(b: &BBox<T>) -> Point2<T> {
    Point2::new((b.x1 + b.x2) * T::half(), (b.y1 + b.y2) * T::half())
}

/// Closed-interval containment on both axes: boundary points count as inside.
pub fn contains<T: Scalar>(b: &BBox<T>, p: Point2<T>) -> bool {
    b.x1 <= p.x && p.x <= b.x2 && b.y1 <= p.y && p.y <= b.y2
}

/// Intersection over union; zero when the union has no area.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection(b).map(|i| i.area()).unwrap_or_else(T::zero);
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        inter / union
    }
}

/// Moves `b` inside `bounds` without changing its size. A box larger than
/// `bounds` along an axis is clipped to the bounds on that axis.
pub fn fit_within<T: Scalar>(b: &BBox<T>, bounds: &BBox<T>) -> BBox<T> {
    let (x1, x2) = fit_axis(b.x1, b.x2, bounds.x1, bounds.x2);
    let (y1, y2) = fit_axis(b.y1, b.y2, bounds.y1, bounds.y2);
    BBox::raw(x1, y1, x2, y2)
}

fn fit_axis<T: Scalar>(lo: T, hi: T, min: T, max: T) -> (T, T) {
    let len = hi - lo;
    if len >= max - min {
        return (min, max);
    }
    if lo < min {
        (min, min + len)
    } else if hi > max {
        (max - len, max)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox<f64> {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn center_examples() {
        assert_eq!(center(&b(10.0, 10.0, 30.0, 30.0)), Point2::new(20.0, 20.0));
        assert_eq!(center(&b(0.0, 0.0, 0.0, 0.0)), Point2::new(0.0, 0.0));
        assert_eq!(center(&b(5.0, 8.0, 6.0, 10.0)), Point2::new(5.5, 9.0));
    }

    #[test]
    fn contains_is_closed() {
        let gt = b(10.0, 10.0, 30.0, 30.0);
        assert!(contains(&gt, Point2::new(20.0, 20.0)));
        assert!(contains(&gt, Point2::new(30.0, 30.0)));
        assert!(contains(&gt, Point2::new(10.0, 30.0)));
        assert!(!contains(&gt, Point2::new(31.0, 20.0)));
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(20.0, 20.0, 30.0, 30.0)), 0.0);
        let v = iou(&a, &b(5.0, 0.0, 15.0, 10.0));
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        // degenerate union
        let p = b(1.0, 1.0, 1.0, 1.0);
        assert_eq!(iou(&p, &p), 0.0);
    }

    #[test]
    fn rejects_inverted_box() {
        assert!(BBox::new(30.0, 30.0, 10.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn fit_within_shifts_and_clips() {
        let bounds = b(0.0, 0.0, 100.0, 50.0);
        assert_eq!(fit_within(&b(-10.0, -5.0, 20.0, 15.0), &bounds), b(0.0, 0.0, 30.0, 20.0));
        assert_eq!(fit_within(&b(90.0, 40.0, 110.0, 60.0), &bounds), b(80.0, 30.0, 100.0, 50.0));
        assert_eq!(fit_within(&b(-10.0, 0.0, 200.0, 10.0), &bounds), b(0.0, 0.0, 100.0, 10.0));
    }

    #[test]
    fn serde_as_array() {
        let s = serde_json::to_string(&b(1.0, 2.0, 3.0, 4.5)).unwrap();
        assert_eq!(s, "[1.0,2.0,3.0,4.5]");
        assert!(serde_json::from_str::<BBox<f64>>("[3,0,1,1]").is_err());
    }
}
