use image::Rgb;

use crate::backends::ImagePayload;
use crate::geometry::fit_within;
use crate::PixelBox;

pub const MARK_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

/// Outline width for an image whose longer side is `max_dim` pixels.
pub fn stroke_width(max_dim: u32) -> u32 {
    let w = (0.002 * max_dim as f64).round() as u32;
    w.max(2)
}

/// Integer pixel rectangle `[x0, x1) × [y0, y1)` covered by `b` after it has
/// been shifted into a `w × h` image. Never empty.
fn pixel_rect(b: &PixelBox, w: u32, h: u32) -> (u32, u32, u32, u32) {
    let bounds = PixelBox::new(0.0, 0.0, w as f64, h as f64).expect("positive image size");
    let fitted = fit_within(b, &bounds);
    let x0 = (fitted.x1().floor() as u32).min(w - 1);
    let y0 = (fitted.y1().floor() as u32).min(h - 1);
    let x1 = (fitted.x2().ceil() as u32).clamp(x0 + 1, w);
    let y1 = (fitted.y2().ceil() as u32).clamp(y0 + 1, h);
    (x0, y0, x1, y1)
}

/// Returns a copy of `image` with a red outline drawn just inside `local_box`
/// (local coordinates). The box is shifted into the image first, so marks
/// near an edge stay fully visible. The source image is left untouched.
pub fn draw_mark(image: &ImagePayload, local_box: &PixelBox) -> ImagePayload {
    let (w, h) = image.size();
    let mut pixels = image.pixels().clone();
    let (x0, y0, x1, y1) = pixel_rect(local_box, w, h);
    let stroke = stroke_width(w.max(h));
    for y in y0..y1 {
        for x in x0..x1 {
            let band = x < x0 + stroke || x + stroke >= x1 || y < y0 + stroke || y + stroke >= y1;
            if band {
                pixels.put_pixel(x, y, MARK_COLOR);
            }
        }
    }
    let recorded = PixelBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).expect("ordered rect");
    image.with_marked_pixels(pixels, recorded)
}
