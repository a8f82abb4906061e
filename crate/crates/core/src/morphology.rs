//! Binary erosion, dilation, opening and closing.
//!
//! Pixels outside the frame count as background for every operation, so
//! erosion eats into masks that touch the border.

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementShape {
    /// `(2r+1) x (2r+1)` square.
    Square,
    /// Offsets with `dx² + dy² <= r²`.
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    shape: ElementShape,
    radius: u32,
}

impl StructuringElement {
    pub fn new(shape: ElementShape, radius: u32) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidParameter(
                "structuring element radius must be at least 1".into(),
            ));
        }
        Ok(Self { shape, radius })
    }

    pub fn square(radius: u32) -> Result<Self> {
        Self::new(ElementShape::Square, radius)
    }

    pub fn disk(radius: u32) -> Result<Self> {
        Self::new(ElementShape::Disk, radius)
    }

    pub fn shape(&self) -> ElementShape {
        self.shape
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Horizontal half-extent of the element on each row offset `-r..=r`.
    /// Both shapes are unions of centred horizontal runs.
    fn row_spans(&self) -> Vec<(i64, i64)> {
        let r = i64::from(self.radius);
        (-r..=r)
            .map(|dy| {
                let half = match self.shape {
                    ElementShape::Square => r,
                    ElementShape::Disk => {
                        let mut h = ((r * r - dy * dy) as f64).sqrt() as i64;
                        while (h + 1) * (h + 1) + dy * dy <= r * r {
                            h += 1;
                        }
                        while h * h + dy * dy > r * r {
                            h -= 1;
                        }
                        h
                    }
                };
                (dy, half)
            })
            .collect()
    }

    /// Every offset the element covers.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        self.row_spans()
            .into_iter()
            .flat_map(|(dy, h)| (-h..=h).map(move |dx| (dx, dy)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

pub fn morph(op: MorphOp, mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    match op {
        MorphOp::Erode => erode(mask, se),
        MorphOp::Dilate => dilate(mask, se),
        MorphOp::Open => dilate(&erode(mask, se), se),
        MorphOp::Close => erode(&dilate(mask, se), se),
    }
}

/// Per-row prefix counts of foreground pixels, `w + 1` entries per row.
fn row_prefix(mask: &BinaryMask) -> Vec<u32> {
    let w = mask.width() as usize;
    let mut pre = Vec::with_capacity((w + 1) * mask.height() as usize);
    for row in mask.bits().chunks(w.max(1)) {
        let mut acc = 0u32;
        pre.push(0);
        for &b in row {
            acc += u32::from(b);
            pre.push(acc);
        }
    }
    pre
}

pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    let pre = row_prefix(mask);
    let spans = se.row_spans();
    let stride = (w + 1) as usize;
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let (x, y) = (i64::from(x), i64::from(y));
        spans.iter().all(|&(dy, half)| {
            let yy = y + dy;
            if yy < 0 || yy >= h || x - half < 0 || x + half >= w {
                return false;
            }
            let row = &pre[yy as usize * stride..(yy as usize + 1) * stride];
            let ones = row[(x + half + 1) as usize] - row[(x - half) as usize];
            i64::from(ones) == 2 * half + 1
        })
    })
}

pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    let pre = row_prefix(mask);
    let spans = se.row_spans();
    let stride = (w + 1) as usize;
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let (x, y) = (i64::from(x), i64::from(y));
        spans.iter().any(|&(dy, half)| {
            let yy = y + dy;
            if yy < 0 || yy >= h {
                return false;
            }
            let lo = (x - half).max(0) as usize;
            let hi = (x + half + 1).min(w) as usize;
            let row = &pre[yy as usize * stride..(yy as usize + 1) * stride];
            row[hi] > row[lo]
        })
    })
}

pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(MorphOp::Open, mask, se)
}

pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(MorphOp::Close, mask, se)
}

/// Seed-erosion radius for mask refinement: `max(1, floor(0.02 * min side))`
/// of the mask's bounding box, or 1 for an empty mask.
pub fn seed_erosion_radius(mask: &BinaryMask, fraction: f64) -> u32 {
    mask.bounding_box()
        .map(|b| ((fraction * f64::from(b.width().min(b.height()))).floor() as u32).max(1))
        .unwrap_or(1)
}
