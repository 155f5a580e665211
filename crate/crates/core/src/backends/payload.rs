use std::io::Cursor;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use base64::Engine;
use image::{ImageEncoder, RgbImage};
use sha2::{Digest, Sha256};

use super::BackendError;
use crate::{PixelBox, PixelViewport, Point};

/// Screenshot or crop handed to a model, together with where it sits in the
/// original screenshot.
///
/// Cloning is cheap. The PNG encoding and the content digest are computed
/// lazily and cached.
#[derive(Clone)]
pub struct ImagePayload {
    inner: Arc<Inner>,
}

struct Inner {
    pixels: RgbImage,
    viewport: PixelViewport,
    // Marks drawn on this image, in local coordinates.
    marks: Vec<PixelBox>,
    digest: OnceLock<String>,
    png: OnceLock<Vec<u8>>,
}

impl std::fmt::Debug for ImagePayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImagePayload")
            .field("width", &self.width())
            .field("height", &self.height())
            .field("viewport", &self.inner.viewport)
            .field("marks", &self.inner.marks)
            .finish()
    }
}

impl ImagePayload {
    /// Wraps a full screenshot.
    pub fn from_image(pixels: RgbImage) -> Result<Self, BackendError> {
        let viewport = PixelViewport::full(pixels.width() as f64, pixels.height() as f64)
            .map_err(|e| BackendError::Image(e.to_string()))?;
        Ok(Self::build(pixels, viewport, Vec::new()))
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let img = image::open(path)
            .map_err(|e| BackendError::Image(format!("{}: {}", path.display(), e)))?;
        Self::from_image(img.to_rgb8())
    }

    /// Decodes an encoded image (any format the `image` crate was built with).
    pub fn decode(bytes: &[u8]) -> Result<Self, BackendError> {
        let img = image::load_from_memory(bytes).map_err(|e| BackendError::Image(e.to_string()))?;
        Self::from_image(img.to_rgb8())
    }

    fn build(pixels: RgbImage, viewport: PixelViewport, marks: Vec<PixelBox>) -> Self {
        Self {
            inner: Arc::new(Inner {
                pixels,
                viewport,
                marks,
                digest: OnceLock::new(),
                png: OnceLock::new(),
            }),
        }
    }

    pub fn width(&self) -> u32 {
        self.inner.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.inner.pixels.height()
    }

    pub fn size(&self) -> (u32, u32) {
        (self.width(), self.height())
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.inner.pixels
    }

    /// Global placement of this image within the original screenshot.
    pub fn viewport(&self) -> &PixelViewport {
        &self.inner.viewport
    }

    /// Boxes marked on this image (local coordinates), oldest first.
    pub fn marks(&self) -> &[PixelBox] {
        &self.inner.marks
    }

    /// Image bounds in local coordinates.
    pub fn local_bounds(&self) -> PixelBox {
        self.inner.viewport.local_bounds()
    }

    pub fn center_local(&self) -> Point {
        self.local_bounds().center()
    }

    /// Crops `region` (global coordinates, snapped outward to whole pixels)
    /// out of this image.
    pub fn crop(&self, region: &PixelBox) -> Result<ImagePayload, BackendError> {
        let vp = self.viewport();
        let snapped = region.snap_outward();
        let child = PixelViewport::within(&snapped, &vp.bounds())
            .map_err(|e| BackendError::Image(format!("crop: {}", e)))?;
        let lx = (child.offset.x - vp.offset.x) as u32;
        let ly = (child.offset.y - vp.offset.y) as u32;
        let pixels = image::imageops::crop_imm(
            &self.inner.pixels,
            lx,
            ly,
            child.width as u32,
            child.height as u32,
        )
        .to_image();
        Ok(Self::build(pixels, child, Vec::new()))
    }

    /// Same placement, new pixels, with `mark` appended to the mark list.
    pub(crate) fn with_marked_pixels(&self, pixels: RgbImage, mark: PixelBox) -> ImagePayload {
        let mut marks = self.inner.marks.clone();
        marks.push(mark);
        Self::build(pixels, self.inner.viewport, marks)
    }

    /// Lowercase hex SHA-256 over the dimensions and raw RGB bytes.
    pub fn digest(&self) -> &str {
        self.inner.digest.get_or_init(|| {
            let mut h = Sha256::new();
            h.update(self.width().to_le_bytes());
            h.update(self.height().to_le_bytes());
            h.update(self.inner.pixels.as_raw());
            hex::encode(h.finalize())
        })
    }

    /// Lossless PNG encoding.
    pub fn png_bytes(&self) -> &[u8] {
        self.inner.png.get_or_init(|| {
            let mut buf = Cursor::new(Vec::new());
            image::codecs::png::PngEncoder::new(&mut buf)
                .write_image(
                    self.inner.pixels.as_raw(),
                    self.width(),
                    self.height(),
                    image::ExtendedColorType::Rgb8,
                )
                .expect("PNG encoding into memory");
            buf.into_inner()
        })
    }

    pub fn data_url(&self) -> String {
        format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(self.png_bytes())
        )
    }
}
