//! Renders a search trace as one annotated image per visited patch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{imageops, Rgb, RgbImage};
use seeker_core::planner::stroke_width;
use seeker_core::search::{Action, SearchStep, SearchTrace};
use seeker_core::{PixelBox, Point};

pub const CANDIDATE: Rgb<u8> = Rgb([0, 90, 255]);
pub const DESCEND: Rgb<u8> = Rgb([255, 140, 0]);
pub const GROUND: Rgb<u8> = Rgb([0, 200, 0]);
pub const FINAL: Rgb<u8> = Rgb([255, 0, 0]);

/// Steps that get an image: descents, checks, and groundings that are not
/// immediately checked (the check image already shows them).
pub fn rendered_steps(trace: &SearchTrace) -> Vec<usize> {
    let steps = &trace.steps;
    (0..steps.len())
        .filter(|&i| match steps[i].action {
            Action::Descend | Action::Verify => true,
            Action::DirectGround => steps.get(i + 1).is_none_or(|n| n.action != Action::Verify),
            _ => false,
        })
        .collect()
}

/// Pixel rectangle of `b` inside a `w × h` image whose origin is `origin`.
fn rect(b: &PixelBox, origin: Point, w: u32, h: u32) -> Option<(u32, u32, u32, u32)> {
    let x0 = (b.x1() - origin.x).floor().max(0.0);
    let y0 = (b.y1() - origin.y).floor().max(0.0);
    let x1 = (b.x2() - origin.x).ceil().min(w as f64);
    let y1 = (b.y2() - origin.y).ceil().min(h as f64);
    (x1 > x0 && y1 > y0).then_some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

fn outline(img: &mut RgbImage, b: &PixelBox, origin: Point, stroke: u32, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let Some((x0, y0, x1, y1)) = rect(b, origin, w, h) else {
        return;
    };
    for y in y0..y1 {
        for x in x0..x1 {
            if x < x0 + stroke || x + stroke >= x1 || y < y0 + stroke || y + stroke >= y1 {
                img.put_pixel(x, y, color);
            }
        }
    }
}

fn around(p: Point, half: f64) -> PixelBox {
    PixelBox::new(p.x - half, p.y - half, p.x + half, p.y + half).expect("positive half side")
}

/// Candidates shown with a descent: the kept boxes of the nearest earlier
/// ranking step on the same patch.
fn candidates_for(trace: &SearchTrace, i: usize) -> &[PixelBox] {
    let step = &trace.steps[i];
    trace.steps[..i]
        .iter()
        .rev()
        .find(|s| s.action == Action::Nms && s.depth == step.depth && s.viewport == step.viewport)
        .map_or(&[], |s| &s.payload.boxes[..])
}

/// Annotated crop of the screenshot for step `i`.
pub fn render_step(screenshot: &RgbImage, trace: &SearchTrace, i: usize) -> RgbImage {
    let step: &SearchStep = &trace.steps[i];
    let vp = step.viewport;
    let (sw, sh) = screenshot.dimensions();
    let origin = Point::new(vp.x1().floor().max(0.0), vp.y1().floor().max(0.0));
    let (x0, y0) = (origin.x as u32, origin.y as u32);
    let w = ((vp.x2().ceil() as u32).min(sw)).saturating_sub(x0).max(1);
    let h = ((vp.y2().ceil() as u32).min(sh)).saturating_sub(y0).max(1);
    let mut img = imageops::crop_imm(screenshot, x0.min(sw - 1), y0.min(sh - 1), w, h).to_image();
    let stroke = stroke_width(w.max(h));
    let marker = (stroke * 4) as f64;

    if step.action == Action::Descend {
        for c in candidates_for(trace, i) {
            outline(&mut img, c, origin, stroke, CANDIDATE);
        }
        for b in &step.payload.boxes {
            outline(&mut img, b, origin, stroke, DESCEND);
        }
    }
    if let Some(p) = step.payload.point {
        outline(&mut img, &around(p, marker / 2.0), origin, stroke, GROUND);
    }
    outline(&mut img, &around(trace.final_prediction(), marker), origin, stroke, FINAL);
    img
}

fn step_label(step: &SearchStep) -> &'static str {
    match step.action {
        Action::Descend => "descend",
        Action::Verify => "verify",
        _ => "ground",
    }
}

/// Writes one PNG per rendered step plus `index.md` into `out`. A missing
/// screenshot produces one warning per step and an index without images.
pub fn render_trace(trace: &SearchTrace, image_root: &Path, out: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let screenshot = match &trace.header.image {
        Some(rel) => image::open(image_root.join(rel)).map(|i| i.to_rgb8()).map_err(|e| format!("{}: {}", rel, e)),
        None => Err("trace header has no image path".to_string()),
    };
    let mut index = String::new();
    let h = &trace.header;
    let _ = writeln!(index, "# {}\n", h.task_id);
    let _ = writeln!(index, "- method: {}", h.method);
    let _ = writeln!(index, "- instruction: {}", h.instruction);
    let _ = writeln!(
        index,
        "- prediction: ({}, {}), {}\n",
        h.final_prediction.x,
        h.final_prediction.y,
        h.termination.as_str()
    );
    let _ = writeln!(index, "| Step | Depth | Action | Viewport | Image |");
    let _ = writeln!(index, "|---|---|---|---|---|");
    let mut written = Vec::new();
    for i in rendered_steps(trace) {
        let step = &trace.steps[i];
        let v = step.viewport;
        let name = format!("step_{:03}_{}.png", i, step_label(step));
        let cell = match &screenshot {
            Ok(img) => {
                let path = out.join(&name);
                render_step(img, trace, i)
                    .save(&path)
                    .map_err(|e| std::io::Error::other(e.to_string()))?;
                written.push(path);
                format!("![{}]({})", name, name)
            }
            Err(e) => {
                eprintln!("warning: step {}: screenshot unavailable ({})", i, e);
                "missing".to_string()
            }
        };
        let _ = writeln!(
            index,
            "| {} | {} | {} | [{}, {}, {}, {}] | {} |",
            i,
            step.depth,
            step_label(step),
            v.x1(),
            v.y1(),
            v.x2(),
            v.y2(),
            cell
        );
    }
    std::fs::write(out.join("index.md"), index)?;
    Ok(written)
}
