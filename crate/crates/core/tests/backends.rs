use std::sync::Arc;

use image::RgbImage;
use proptest::prelude::*;
use seeker_core::backends::{
    format_reply, parse_prediction, ChatClient, GroupPick, Grounder, ImagePayload, OutputConvention, ReplySpec, Script,
    ScriptEntry, ScriptPurpose, ScriptedChat, ViewportMatch,
};
use seeker_core::{PixelBox, Point};

fn convention() -> impl Strategy<Value = OutputConvention> {
    prop::sample::select(OutputConvention::ALL.to_vec())
}

proptest! {
    #[test]
    fn formatted_replies_parse_back(
        conv in convention(),
        (w, h) in (100u32..4000, 100u32..3000),
        (u, v) in (0.0f64..=1.0, 0.0f64..=1.0),
        prefix in "[A-Za-z :]{0,30}",
    ) {
        let p = Point::new((u * w as f64).round(), (v * h as f64).round());
        let raw = format!("{} {}", prefix, format_reply(conv, &PixelBox::at_point(p), (w, h)));
        let parsed = parse_prediction(&raw, conv, (w, h), GroupPick::First).unwrap();
        // Normalized conventions lose precision to their output resolution.
        let tol = match conv {
            OutputConvention::PointAbsolute | OutputConvention::BoxAbsolute => 0.0,
            OutputConvention::PointNormalizedUnit | OutputConvention::BoxNormalizedUnit => 5e-5 * w.max(h) as f64 + 1e-9,
            _ => 5e-4 * w.max(h) as f64 + 1e-9,
        };
        prop_assert!((parsed.point.x - p.x).abs() <= tol && (parsed.point.y - p.y).abs() <= tol,
            "{} -> {:?}, want {:?}", raw, parsed.point, p);
        prop_assert!(!parsed.overflow);
    }
}

#[test]
fn grounding_on_a_crop_returns_global_coordinates() {
    let image = ImagePayload::from_image(RgbImage::new(2000, 1000)).unwrap();
    let crop = image.crop(&PixelBox::new(1000.0, 500.0, 1500.0, 1000.0).unwrap()).unwrap();
    let script = Script {
        entries: vec![ScriptEntry {
            purpose: ScriptPurpose::Ground,
            instruction: None,
            viewport: ViewportMatch::Any,
            reply: ReplySpec::GlobalPoint(Point::new(1200.0, 700.0)),
        }],
        ..Default::default()
    };
    for conv in OutputConvention::ALL {
        let chat: Arc<dyn ChatClient> = Arc::new(ScriptedChat::new(script.clone(), conv));
        let g = Grounder::new(chat, "g", conv);
        let out = g.ground("save", &crop).unwrap();
        // The grounder answers in the crop's own frame.
        assert_eq!(out.prediction, Point::new(200.0, 200.0), "{}", conv.as_str());
        assert_eq!(crop.viewport().point_to_global(out.prediction), Point::new(1200.0, 700.0));
    }
}
