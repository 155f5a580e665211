//! Extraction of click locations from free-form grounder replies.
//!
//! Grounding models disagree on output format: some answer with a point,
//! some with a box; some use absolute pixels, some normalize to `[0, 1]` or
//! `[0, 1000]`. Each backend declares one [`OutputConvention`] and replies are
//! reduced to a single point in the queried image's local pixel space.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{PixelBox, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputConvention {
    PointAbsolute,
    PointNormalizedUnit,
    PointNormalizedThousand,
    BoxAbsolute,
    BoxNormalizedUnit,
    BoxNormalizedThousand,
}

impl OutputConvention {
    pub const ALL: [OutputConvention; 6] = [
        OutputConvention::PointAbsolute,
        OutputConvention::PointNormalizedUnit,
        OutputConvention::PointNormalizedThousand,
        OutputConvention::BoxAbsolute,
        OutputConvention::BoxNormalizedUnit,
        OutputConvention::BoxNormalizedThousand,
    ];

    pub fn arity(self) -> usize {
        if self.is_box() {
            4
        } else {
            2
        }
    }

    pub fn is_box(self) -> bool {
        matches!(
            self,
            OutputConvention::BoxAbsolute
                | OutputConvention::BoxNormalizedUnit
                | OutputConvention::BoxNormalizedThousand
        )
    }

    /// Pixels per output unit along an axis of length `dim`.
    pub fn scale(self, dim: f64) -> f64 {
        match self {
            OutputConvention::PointAbsolute | OutputConvention::BoxAbsolute => 1.0,
            OutputConvention::PointNormalizedUnit | OutputConvention::BoxNormalizedUnit => dim,
            OutputConvention::PointNormalizedThousand | OutputConvention::BoxNormalizedThousand => {
                dim / 1000.0
            }
        }
    }

    /// Maps one raw output number to pixels.
    pub fn to_pixels(self, v: f64, dim: f64) -> f64 {
        match self {
            OutputConvention::PointAbsolute | OutputConvention::BoxAbsolute => v,
            OutputConvention::PointNormalizedUnit | OutputConvention::BoxNormalizedUnit => v * dim,
            OutputConvention::PointNormalizedThousand | OutputConvention::BoxNormalizedThousand => {
                v * dim / 1000.0
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutputConvention::PointAbsolute => "point-absolute",
            OutputConvention::PointNormalizedUnit => "point-normalized-unit",
            OutputConvention::PointNormalizedThousand => "point-normalized-thousand",
            OutputConvention::BoxAbsolute => "box-absolute",
            OutputConvention::BoxNormalizedUnit => "box-normalized-unit",
            OutputConvention::BoxNormalizedThousand => "box-normalized-thousand",
        }
    }
}

impl std::fmt::Display for OutputConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OutputConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputConvention::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown output convention `{}`", s))
    }
}

/// Which coordinate group to use when a reply contains several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPick {
    #[default]
    First,
    /// For models that reason before answering.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedPrediction {
    /// Local pixel coordinates, clamped into the image.
    pub point: Point,
    /// The box itself for box conventions, clamped into the image.
    pub bbox: Option<PixelBox>,
    /// Set when the raw coordinates fell outside the image.
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no coordinate group in reply")]
    NoCoordinates,
    #[error("expected {expected} numbers, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("image size must be positive")]
    EmptyImage,
}

fn group_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let num = r"[-−+]?(?:\d+(?:\.\d*)?|\.\d+)";
        Regex::new(&format!(r"[\[(]?\s*{num}(?:\s*,\s*{num})+\s*[\])]?")).expect("valid regex")
    })
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-−+]?(?:\d+(?:\.\d*)?|\.\d+)").expect("valid regex"))
}

/// All comma-separated numeric groups in `raw`, in order of appearance.
pub fn coordinate_groups(raw: &str) -> Vec<Vec<f64>> {
    group_regex()
        .find_iter(raw)
        .map(|m| {
            number_regex()
                .find_iter(m.as_str())
                .filter_map(|n| n.as_str().replace('−', "-").parse::<f64>().ok())
                .collect()
        })
        .collect()
}

/// Reduces a grounder reply to a point in an image of size `width x height`.
pub fn parse_prediction(
    raw: &str,
    convention: OutputConvention,
    (width, height): (u32, u32),
    pick: GroupPick,
) -> Result<ParsedPrediction, ParseError> {
    if width == 0 || height == 0 {
        return Err(ParseError::EmptyImage);
    }
    let groups = coordinate_groups(raw);
    let group = match pick {
        GroupPick::First => groups.first(),
        GroupPick::Last => groups.last(),
    }
    .ok_or(ParseError::NoCoordinates)?;
    if group.len() != convention.arity() {
        return Err(ParseError::WrongArity {
            expected: convention.arity(),
            found: group.len(),
        });
    }

    let (w, h) = (width as f64, height as f64);
    let px = |v: f64| convention.to_pixels(v, w);
    let py = |v: f64| convention.to_pixels(v, h);
    let clamp = |p: Point| Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h));

    let (raw_point, bbox) = if convention.is_box() {
        let (ax, ay, bx, by) = (px(group[0]), py(group[1]), px(group[2]), py(group[3]));
        let raw_box = PixelBox::new(ax.min(bx), ay.min(by), ax.max(bx), ay.max(by))
            .map_err(|_| ParseError::NoCoordinates)?;
        let lo = clamp(Point::new(raw_box.x1(), raw_box.y1()));
        let hi = clamp(Point::new(raw_box.x2(), raw_box.y2()));
        let clipped = PixelBox::new(lo.x, lo.y, hi.x, hi.y).map_err(|_| ParseError::NoCoordinates)?;
        (raw_box.center(), Some(clipped))
    } else {
        (Point::new(px(group[0]), py(group[1])), None)
    };
    if !raw_point.is_finite() {
        return Err(ParseError::NoCoordinates);
    }
    let point = clamp(raw_point);
    Ok(ParsedPrediction {
        point,
        bbox,
        overflow: point != raw_point,
    })
}

/// Formats a local pixel point (or box) as a reply in `convention`, the way a
/// model following that convention would. Used by scripted backends.
pub fn format_reply(convention: OutputConvention, bbox: &PixelBox, (width, height): (u32, u32)) -> String {
    let (w, h) = (width as f64, height as f64);
    let enc = |v: f64, dim: f64| -> String {
        match convention {
            OutputConvention::PointAbsolute | OutputConvention::BoxAbsolute => format!("{}", v.round()),
            OutputConvention::PointNormalizedUnit | OutputConvention::BoxNormalizedUnit => {
                format!("{:.4}", v / dim)
            }
            OutputConvention::PointNormalizedThousand | OutputConvention::BoxNormalizedThousand => {
                format!("{}", (v * 1000.0 / dim).round())
            }
        }
    };
    if convention.is_box() {
        format!(
            "({},{},{},{})",
            enc(bbox.x1(), w),
            enc(bbox.y1(), h),
            enc(bbox.x2(), w),
            enc(bbox.y2(), h)
        )
    } else {
        let c = bbox.center();
        format!("({}, {})", enc(c.x, w), enc(c.y, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str, c: OutputConvention, size: (u32, u32)) -> Result<ParsedPrediction, ParseError> {
        parse_prediction(raw, c, size, GroupPick::First)
    }

    #[test]
    fn absolute_point() {
        let p = parse("[100, 200]", OutputConvention::PointAbsolute, (4000, 2000)).unwrap();
        assert_eq!(p.point, Point::new(100.0, 200.0));
        assert!(!p.overflow);
    }

    #[test]
    fn normalized_unit_point() {
        let p = parse("(0.32, 0.45)", OutputConvention::PointNormalizedUnit, (2000, 1000)).unwrap();
        assert!((p.point.x - 640.0).abs() < 1e-9);
        assert!((p.point.y - 450.0).abs() < 1e-9);
    }

    #[test]
    fn thousand_scale_point() {
        let p = parse("click at (500,500)", OutputConvention::PointNormalizedThousand, (3840, 2160)).unwrap();
        assert_eq!(p.point, Point::new(1920.0, 1080.0));
    }

    #[test]
    fn box_reduces_to_center() {
        let p = parse("(512,160,612,260)", OutputConvention::BoxAbsolute, (4000, 2000)).unwrap();
        assert_eq!(p.point, Point::new(562.0, 210.0));
        assert_eq!(p.bbox, Some(PixelBox::new(512.0, 160.0, 612.0, 260.0).unwrap()));
    }

    #[test]
    fn negative_coordinates_clamp_with_flag() {
        for raw in ["(−5, 10)", "(-5, 10)"] {
            let p = parse(raw, OutputConvention::PointAbsolute, (100, 100)).unwrap();
            assert_eq!(p.point, Point::new(0.0, 10.0));
            assert!(p.overflow);
        }
        let p = parse("(150, 10)", OutputConvention::PointAbsolute, (100, 100)).unwrap();
        assert_eq!(p.point, Point::new(100.0, 10.0));
    }

    #[test]
    fn failures() {
        assert_eq!(parse("no idea", OutputConvention::PointAbsolute, (10, 10)), Err(ParseError::NoCoordinates));
        assert_eq!(
            parse("(1, 2, 3, 4)", OutputConvention::PointAbsolute, (10, 10)),
            Err(ParseError::WrongArity { expected: 2, found: 4 })
        );
        assert_eq!(
            parse("(1, 2)", OutputConvention::BoxAbsolute, (10, 10)),
            Err(ParseError::WrongArity { expected: 4, found: 2 })
        );
        assert_eq!(parse("(1, 2)", OutputConvention::PointAbsolute, (0, 10)), Err(ParseError::EmptyImage));
    }

    #[test]
    fn first_or_last_group() {
        let raw = "The toolbar at (10, 20) is near; the answer is (30, 40)";
        let first = parse_prediction(raw, OutputConvention::PointAbsolute, (100, 100), GroupPick::First).unwrap();
        let last = parse_prediction(raw, OutputConvention::PointAbsolute, (100, 100), GroupPick::Last).unwrap();
        assert_eq!(first.point, Point::new(10.0, 20.0));
        assert_eq!(last.point, Point::new(30.0, 40.0));
    }

    #[test]
    fn single_number_is_not_a_group() {
        let raw = "Step 1: look. Answer: 12,34";
        let p = parse(raw, OutputConvention::PointAbsolute, (100, 100)).unwrap();
        assert_eq!(p.point, Point::new(12.0, 34.0));
    }

    #[test]
    fn format_then_parse() {
        let b = PixelBox::new(100.0, 50.0, 300.0, 150.0).unwrap();
        for c in OutputConvention::ALL {
            let reply = format_reply(c, &b, (1000, 1000));
            let p = parse(&reply, c, (1000, 1000)).unwrap();
            assert!((p.point.x - 200.0).abs() < 1e-9, "{c}: {reply}");
            assert!((p.point.y - 100.0).abs() < 1e-9, "{c}: {reply}");
        }
    }

    #[test]
    fn convention_names_round_trip() {
        for c in OutputConvention::ALL {
            assert_eq!(c.as_str().parse::<OutputConvention>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
    }
}
