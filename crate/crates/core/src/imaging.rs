//! Image containers, patch extraction, and resampling.
//!
//! Patches are cropped around a (possibly sub-pixel) center; anything falling
//! outside the frame is filled by replicating the nearest edge pixel, which
//! keeps feature statistics stable near the image border.

use crate::error::{Error, Result};

/// An 8-bit image, interleaved row-major, 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    data: Vec<u8>,
    width: usize,
    height: usize,
    channels: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero-sized frame {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidFrame(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidFrame(format!(
                "buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Frame {
            data,
            width,
            height,
            channels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Pixel lookup with edge replication for out-of-bounds coordinates.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64, c: usize) -> u8 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(xc, yc, c)
    }

    /// ITU-R 601 luma conversion; a gray frame is returned unchanged.
    pub fn to_gray(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            data.push(y.round().clamp(0.0, 255.0) as u8);
        }
        Frame {
            data,
            width: self.width,
            height: self.height,
            channels: 1,
        }
    }
}

/// Axis-aligned bounding box, top-left corner plus extent, 0-based pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    /// Intersection over union; 0 when either box is degenerate.
    pub fn iou(&self, other: &BBox) -> f64 {
        if !self.is_valid() || !other.is_valid() {
            return 0.0;
        }
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        let inter = (x1 - x0).max(0.0) * (y1 - y0).max(0.0);
        let union = self.w * self.h + other.w * other.h - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn intersects_frame(&self, frame: &Frame) -> bool {
        self.is_valid()
            && self.x < frame.width() as f64
            && self.y < frame.height() as f64
            && self.x + self.w > 0.0
            && self.y + self.h > 0.0
    }
}

/// Crop a `size`-sized patch centered at `center` (x, y pixels).
///
/// The center is rounded to the nearest integer pixel; out-of-bounds regions
/// replicate the nearest edge pixel. Sub-pixel precision is recovered later by
/// response-map interpolation, not by sub-pixel cropping.
pub fn extract_patch(frame: &Frame, center: (f64, f64), size: (usize, usize)) -> Frame {
    let (w, h) = size;
    assert!(w > 0 && h > 0, "patch size must be positive");
    let cx = center.0.round() as i64;
    let cy = center.1.round() as i64;
    let x0 = cx - (w / 2) as i64;
    let y0 = cy - (h / 2) as i64;
    let channels = frame.channels();
    let mut data = Vec::with_capacity(w * h * channels);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            for c in 0..channels {
                data.push(frame.get_clamped(x0 + x, y0 + y, c));
            }
        }
    }
    Frame {
        data,
        width: w,
        height: h,
        channels,
    }
}

/// Bilinear resampling to `target` (w, h). Resizing to the source size is the
/// identity; pixel centers are aligned via the half-pixel convention.
pub fn resize(frame: &Frame, target: (usize, usize)) -> Frame {
    let (tw, th) = target;
    assert!(tw > 0 && th > 0, "target size must be positive");
    if tw == frame.width() && th == frame.height() {
        return frame.clone();
    }
    let sx = frame.width() as f64 / tw as f64;
    let sy = frame.height() as f64 / th as f64;
    let channels = frame.channels();
    let mut data = Vec::with_capacity(tw * th * channels);
    for y in 0..th {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, frame.height() as f64 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(frame.height() - 1);
        let wy = fy - y0 as f64;
        for x in 0..tw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, frame.width() as f64 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(frame.width() - 1);
            let wx = fx - x0 as f64;
            for c in 0..channels {
                let p00 = frame.get(x0, y0, c) as f64;
                let p01 = frame.get(x1, y0, c) as f64;
                let p10 = frame.get(x0, y1, c) as f64;
                let p11 = frame.get(x1, y1, c) as f64;
                let top = p00 + (p01 - p00) * wx;
                let bot = p10 + (p11 - p10) * wx;
                let v = top + (bot - top) * wy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame {
        data,
        width: tw,
        height: th,
        channels,
    }
}
