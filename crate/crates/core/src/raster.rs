//! Raster containers, boxes and point prompts.
//!
//! Coordinates follow the pixel-index convention: pixel `(x, y)` sits at
//! column `x`, row `y`, and a sub-pixel point `(x, y)` is measured in the same
//! units, so the centroid of pixels `{0, 1, 2}` is `1.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An RGB colour scaled to the unit interval.
pub type Color = [f64; 3];

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "zero-sized raster {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} samples for {width}x{height}x3, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel in row-major order.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn color(&self, x: u32, y: u32) -> Color {
        let i = y as usize * self.width as usize + x as usize;
        self.color_at(i)
    }

    /// Colour of the pixel with flat row-major index `i`.
    pub fn color_at(&self, i: usize) -> Color {
        let p = &self.data[i * 3..i * 3 + 3];
        [
            f64::from(p[0]) / 255.0,
            f64::from(p[1]) / 255.0,
            f64::from(p[2]) / 255.0,
        ]
    }

    /// All pixel colours, row-major.
    pub fn colors(&self) -> Vec<Color> {
        (0..self.len()).map(|i| self.color_at(i)).collect()
    }
}

/// Half-open box `[x1, x2) x [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BoundingBox {
    pub const fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> u32 {
        self.x2.saturating_sub(self.x1)
    }

    pub fn height(&self) -> u32 {
        self.y2.saturating_sub(self.y1)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Checks the box is non-empty and fits a `width` x `height` frame.
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        if self.x1 < self.x2 && self.y1 < self.y2 && self.x2 <= width && self.y2 <= height {
            Ok(())
        } else {
            Err(Error::InvalidBox {
                bbox: *self,
                width,
                height,
            })
        }
    }

    /// Centre of the covered pixel indices.
    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x1) + f64::from(self.x2) - 1.0) / 2.0,
            (f64::from(self.y1) + f64::from(self.y2) - 1.0) / 2.0,
        )
    }

    /// True when the sub-pixel point lies within the covered pixel indices.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= f64::from(self.x1)
            && x <= f64::from(self.x2) - 1.0
            && y >= f64::from(self.y1)
            && y <= f64::from(self.y2) - 1.0
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let b = BoundingBox::new(
            self.x1.max(other.x1),
            self.y1.max(other.y1),
            self.x2.min(other.x2),
            self.y2.min(other.y2),
        );
        (b.x1 < b.x2 && b.y1 < b.y2).then_some(b)
    }

    pub fn to_array(&self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// A labelled point prompt. `label == 1` marks foreground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrompt {
    pub x: f64,
    pub y: f64,
    pub label: u8,
    /// Set when the point came from a fallback rule rather than a selected region.
    pub fallback: bool,
}

impl PointPrompt {
    pub const FOREGROUND: u8 = 1;

    pub fn foreground(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            label: Self::FOREGROUND,
            fallback: false,
        }
    }

    pub fn with_fallback(mut self, fallback: bool) -> Self {
        self.fallback = fallback;
        self
    }

    /// Nearest pixel index.
    pub fn pixel(&self) -> (u32, u32) {
        (
            self.x.round().max(0.0) as u32,
            self.y.round().max(0.0) as u32,
        )
    }
}

/// One bit per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} mask bits for {width}x{height}, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn all(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// `self ⊆ other`, assuming equal dimensions.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Number of pixels where the two masks differ.
    pub fn xor_count(&self, other: &BinaryMask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn ensure_dims(&self, width: u32, height: u32) -> Result<()> {
        if self.dims() == (width, height) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: (width, height),
                found: self.dims(),
            })
        }
    }

    /// Tight box around the foreground, `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut b: Option<BoundingBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let bb = b.get_or_insert(BoundingBox::new(x, y, x + 1, y + 1));
                    bb.x1 = bb.x1.min(x);
                    bb.y1 = bb.y1.min(y);
                    bb.x2 = bb.x2.max(x + 1);
                    bb.y2 = bb.y2.max(y + 1);
                }
            }
        }
        b
    }
}

/// Extracts `image[y1:y2, x1:x2]`.
pub fn crop_roi(image: &RasterImage, bbox: &BoundingBox) -> Result<RasterImage> {
    bbox.validate(image.width(), image.height())?;
    let row_bytes = bbox.width() as usize * 3;
    let mut data = Vec::with_capacity(row_bytes * bbox.height() as usize);
    let stride = image.width() as usize * 3;
    for y in bbox.y1..bbox.y2 {
        let start = y as usize * stride + bbox.x1 as usize * 3;
        data.extend_from_slice(&image.data()[start..start + row_bytes]);
    }
    RasterImage::new(bbox.width(), bbox.height(), data)
}

/// Maps a point from the ROI frame of `bbox` back to the full image.
pub fn roi_to_image(point: &PointPrompt, bbox: &BoundingBox) -> Result<PointPrompt> {
    let (w, h) = (f64::from(bbox.width()), f64::from(bbox.height()));
    if !(point.x >= 0.0 && point.x < w && point.y >= 0.0 && point.y < h) {
        return Err(Error::CoordinateOutOfRange {
            x: point.x,
            y: point.y,
            width: bbox.width(),
            height: bbox.height(),
        });
    }
    Ok(PointPrompt {
        x: point.x + f64::from(bbox.x1),
        y: point.y + f64::from(bbox.y1),
        ..*point
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coded_image(width: u32, height: u32) -> RasterImage {
        RasterImage::from_fn(width, height, |x, y| [x as u8, y as u8, (x ^ y) as u8])
    }

    #[test]
    fn crop_offsets_pixels() {
        let img = coded_image(100, 100);
        let roi = crop_roi(&img, &BoundingBox::new(10, 20, 30, 50)).unwrap();
        assert_eq!(roi.dims(), (20, 30));
        assert_eq!(roi.pixel(0, 0), img.pixel(10, 20));
        assert_eq!(roi.pixel(19, 29), img.pixel(29, 49));
    }

    #[test]
    fn full_frame_crop_is_identity() {
        let img = coded_image(17, 9);
        let roi = crop_roi(&img, &BoundingBox::new(0, 0, 17, 9)).unwrap();
        assert_eq!(roi, img);
    }

    #[test]
    fn empty_or_outside_boxes_are_rejected() {
        let img = coded_image(100, 100);
        for b in [
            BoundingBox::new(5, 5, 5, 9),
            BoundingBox::new(5, 9, 8, 9),
            BoundingBox::new(90, 0, 101, 10),
            BoundingBox::new(9, 5, 5, 9),
        ] {
            assert!(matches!(crop_roi(&img, &b), Err(Error::InvalidBox { .. })));
        }
    }

    #[test]
    fn crop_never_reads_the_canary_border() {
        // 1-pixel canary frame of 255 around a zero interior.
        let img = RasterImage::from_fn(12, 10, |x, y| {
            if x == 0 || y == 0 || x == 11 || y == 9 {
                [255; 3]
            } else {
                [0; 3]
            }
        });
        let roi = crop_roi(&img, &BoundingBox::new(1, 1, 11, 9)).unwrap();
        assert!(roi.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn roi_points_translate() {
        let p = roi_to_image(
            &PointPrompt::foreground(0.0, 0.0),
            &BoundingBox::new(10, 20, 30, 50),
        )
        .unwrap();
        assert_eq!((p.x, p.y), (10.0, 20.0));

        let p = roi_to_image(
            &PointPrompt::foreground(5.5, 7.0).with_fallback(true),
            &BoundingBox::new(100, 200, 150, 260),
        )
        .unwrap();
        assert_eq!((p.x, p.y), (105.5, 207.0));
        assert!(p.fallback);
    }

    #[test]
    fn roi_point_outside_extent_is_rejected() {
        let err = roi_to_image(
            &PointPrompt::foreground(25.0, 3.0),
            &BoundingBox::new(0, 0, 20, 20),
        );
        assert!(matches!(err, Err(Error::CoordinateOutOfRange { .. })));
    }

    #[test]
    fn raster_length_is_checked() {
        assert!(RasterImage::new(2, 2, vec![0; 11]).is_err());
        assert!(RasterImage::new(0, 2, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn crop_then_translate_round_trips(
            x1 in 0u32..40, y1 in 0u32..40, w in 1u32..20, h in 1u32..20,
            fu in 0.0f64..1.0, fv in 0.0f64..1.0,
        ) {
            let img = coded_image(64, 64);
            let b = BoundingBox::new(x1, y1, x1 + w, y1 + h);
            let roi = crop_roi(&img, &b).unwrap();
            let u = (fu * f64::from(w)).min(f64::from(w) - 1.0).floor();
            let v = (fv * f64::from(h)).min(f64::from(h) - 1.0).floor();
            let p = roi_to_image(&PointPrompt::foreground(u, v), &b).unwrap();
            prop_assert_eq!(p.x, u + f64::from(x1));
            prop_assert_eq!(p.y, v + f64::from(y1));
            prop_assert_eq!(roi.pixel(u as u32, v as u32), img.pixel(p.x as u32, p.y as u32));
        }
    }
}
