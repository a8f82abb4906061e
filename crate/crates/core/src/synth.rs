//! Deterministic synthetic scenes with exact ground truth.
//!
//! A single object is rendered over a noisy, optionally sloped background,
//! with a few distractor blobs kept clear of it. Coverage uses the pixel
//! centre, so `gt_mask` is exactly the set of pixels whose centre `(x, y)`
//! lies inside the analytic shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{dilate, StructuringElement};
use crate::raster::{BinaryMask, BoundingBox, RasterImage};

pub const MAX_JITTER: f64 = 0.3;
const JITTER_ATTEMPTS: usize = 64;
const DISTRACTOR_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rectangle {
        width: f64,
        height: f64,
    },
    RotatedRectangle {
        width: f64,
        height: f64,
        angle_deg: f64,
    },
    Ellipse {
        semi_major: f64,
        semi_minor: f64,
        angle_deg: f64,
    },
    /// Vertical bar on the left joined to a horizontal bar along the bottom.
    LShape {
        width: f64,
        height: f64,
        thickness: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangle,
    RotatedRectangle,
    Ellipse,
    LShape,
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Rectangle { .. } => ShapeKind::Rectangle,
            Shape::RotatedRectangle { .. } => ShapeKind::RotatedRectangle,
            Shape::Ellipse { .. } => ShapeKind::Ellipse,
            Shape::LShape { .. } => ShapeKind::LShape,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok = match *self {
            Shape::Rectangle { width, height } => positive(width) && positive(height),
            Shape::RotatedRectangle {
                width,
                height,
                angle_deg,
            } => positive(width) && positive(height) && angle_deg.is_finite(),
            Shape::Ellipse {
                semi_major,
                semi_minor,
                angle_deg,
            } => positive(semi_major) && positive(semi_minor) && angle_deg.is_finite(),
            Shape::LShape {
                width,
                height,
                thickness,
            } => positive(width) && positive(height) && positive(thickness),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("bad shape geometry {self:?}")))
        }
    }

    /// Half extents of the axis-aligned box around the shape.
    pub fn half_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Rectangle { width, height } | Shape::LShape { width, height, .. } => {
                (width / 2.0, height / 2.0)
            }
            Shape::RotatedRectangle {
                width,
                height,
                angle_deg,
            } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                (
                    (width * c.abs() + height * s.abs()) / 2.0,
                    (width * s.abs() + height * c.abs()) / 2.0,
                )
            }
            Shape::Ellipse {
                semi_major: a,
                semi_minor: b,
                angle_deg,
            } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                (
                    (a * a * c * c + b * b * s * s).sqrt(),
                    (a * a * s * s + b * b * c * c).sqrt(),
                )
            }
        }
    }

    /// Whether the offset `(dx, dy)` from the shape centre is covered.
    pub fn contains(&self, dx: f64, dy: f64) -> bool {
        let rotate = |deg: f64| {
            let (s, c) = deg.to_radians().sin_cos();
            (c * dx + s * dy, -s * dx + c * dy)
        };
        let half_open = |v: f64, half: f64| -half <= v && v < half;
        match *self {
            Shape::Rectangle { width, height } => {
                half_open(dx, width / 2.0) && half_open(dy, height / 2.0)
            }
            Shape::RotatedRectangle {
                width,
                height,
                angle_deg,
            } => {
                let (u, v) = rotate(angle_deg);
                half_open(u, width / 2.0) && half_open(v, height / 2.0)
            }
            Shape::Ellipse {
                semi_major,
                semi_minor,
                angle_deg,
            } => {
                let (u, v) = rotate(angle_deg);
                (u / semi_major).powi(2) + (v / semi_minor).powi(2) <= 1.0
            }
            Shape::LShape {
                width,
                height,
                thickness,
            } => {
                half_open(dx, width / 2.0)
                    && half_open(dy, height / 2.0)
                    && (dx < -width / 2.0 + thickness || dy >= height / 2.0 - thickness)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub shape: Shape,
    /// Shape centre in pixel-centre coordinates; the canvas centre if absent.
    #[serde(default)]
    pub center: Option<(f64, f64)>,
    /// Mean RGB of the object, 0-255.
    pub object_color: [f64; 3],
    pub object_noise: f64,
    pub background_color: [f64; 3],
    pub background_noise: f64,
    /// Total change across the canvas along x and y, added to every channel.
    #[serde(default)]
    pub gradient: (f64, f64),
    #[serde(default)]
    pub distractors: u32,
    /// Edge displacement of the prompt box, as a fraction of the box size.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    fn center(&self) -> (f64, f64) {
        self.center.unwrap_or((
            (f64::from(self.width) - 1.0) / 2.0,
            (f64::from(self.height) - 1.0) / 2.0,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec("empty canvas".into()));
        }
        self.shape.validate()?;
        if !(0.0..=MAX_JITTER).contains(&self.jitter) {
            return Err(Error::InvalidSpec(format!(
                "jitter {} outside [0, {MAX_JITTER}]",
                self.jitter
            )));
        }
        if !(self.object_noise >= 0.0 && self.background_noise >= 0.0) {
            return Err(Error::InvalidSpec("noise levels must be >= 0".into()));
        }
        let (cx, cy) = self.center();
        let (ex, ey) = self.shape.half_extent();
        let fits = cx - ex >= -0.5
            && cy - ey >= -0.5
            && cx + ex <= f64::from(self.width) - 0.5
            && cy + ey <= f64::from(self.height) - 0.5;
        if !fits {
            return Err(Error::InvalidSpec(format!(
                "object of half extent ({ex:.1}, {ey:.1}) at ({cx:.1}, {cy:.1}) does not fit a {}x{} canvas",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: RasterImage,
    pub gt_mask: BinaryMask,
    pub gt_box: BoundingBox,
    pub jittered_box: BoundingBox,
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

struct Blob {
    shape: Shape,
    center: (f64, f64),
    color: [f64; 3],
}

fn place_distractors(
    spec: &SceneSpec,
    keep_clear: &BoundingBox,
    rng: &mut ChaCha8Rng,
) -> Vec<Blob> {
    let (ox, oy) = spec.shape.half_extent();
    let scale = ox.max(oy);
    let mut blobs = Vec::new();
    for _ in 0..spec.distractors {
        for _ in 0..DISTRACTOR_ATTEMPTS {
            let a = rng.random_range(0.2..0.5) * scale;
            let b = a * rng.random_range(0.4..1.0);
            let shape = if rng.random_bool(0.5) {
                Shape::Ellipse {
                    semi_major: a,
                    semi_minor: b,
                    angle_deg: rng.random_range(0.0..180.0),
                }
            } else {
                Shape::Rectangle {
                    width: 2.0 * a,
                    height: 2.0 * b,
                }
            };
            let (ex, ey) = shape.half_extent();
            let cx = rng.random_range(0.0..f64::from(spec.width));
            let cy = rng.random_range(0.0..f64::from(spec.height));
            let color = [
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
            ];
            let margin = 2.0;
            let clear = cx + ex + margin < f64::from(keep_clear.x1)
                || cx - ex - margin > f64::from(keep_clear.x2 - 1)
                || cy + ey + margin < f64::from(keep_clear.y1)
                || cy - ey - margin > f64::from(keep_clear.y2 - 1);
            if clear {
                blobs.push(Blob {
                    shape,
                    center: (cx, cy),
                    color,
                });
                break;
            }
        }
    }
    blobs
}

fn jitter_box(
    gt_box: &BoundingBox,
    mask: &BinaryMask,
    j: f64,
    rng: &mut ChaCha8Rng,
) -> BoundingBox {
    if j == 0.0 {
        return *gt_box;
    }
    let (w, h) = mask.dims();
    let bw = f64::from(gt_box.width());
    let bh = f64::from(gt_box.height());
    for _ in 0..JITTER_ATTEMPTS {
        let mut shift = |v: u32, size: f64| f64::from(v) + rng.random_range(-j..=j) * size;
        let x1 = shift(gt_box.x1, bw).round().clamp(0.0, f64::from(w - 1)) as u32;
        let y1 = shift(gt_box.y1, bh).round().clamp(0.0, f64::from(h - 1)) as u32;
        let x2 = shift(gt_box.x2, bw).round().clamp(1.0, f64::from(w)) as u32;
        let y2 = shift(gt_box.y2, bh).round().clamp(1.0, f64::from(h)) as u32;
        if x1 >= x2 || y1 >= y2 {
            continue;
        }
        let candidate = BoundingBox::new(x1, y1, x2, y2);
        let overlaps = (y1..y2).any(|y| (x1..x2).any(|x| mask.get(x, y)));
        if overlaps {
            return candidate;
        }
    }
    *gt_box
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let (cx, cy) = spec.center();
    let gt_mask = BinaryMask::from_fn(w, h, |x, y| {
        spec.shape.contains(f64::from(x) - cx, f64::from(y) - cy)
    });
    let gt_box = gt_mask
        .bounding_box()
        .ok_or_else(|| Error::InvalidSpec("object covers no pixel centre".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blobs = place_distractors(spec, &gt_box, &mut rng);
    let bg_noise =
        Normal::new(0.0, spec.background_noise).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let obj_noise =
        Normal::new(0.0, spec.object_noise).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (f64::from(x), f64::from(y));
            let (base, noise) = if gt_mask.get(x, y) {
                (spec.object_color, &obj_noise)
            } else {
                let slope = spec.gradient.0 * (fx / f64::from(w) - 0.5)
                    + spec.gradient.1 * (fy / f64::from(h) - 0.5);
                let mut c = spec.background_color.map(|v| v + slope);
                if let Some(b) = blobs
                    .iter()
                    .rev()
                    .find(|b| b.shape.contains(fx - b.center.0, fy - b.center.1))
                {
                    c = b.color;
                }
                (c, &bg_noise)
            };
            for v in base {
                data.push(to_u8(v + noise.sample(&mut rng)));
            }
        }
    }
    let image = RasterImage::new(w, h, data)?;

    let mut jitter_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    jitter_rng.set_stream(1);
    let jittered_box = jitter_box(&gt_box, &gt_mask, spec.jitter, &mut jitter_rng);
    Ok(Scene {
        image,
        gt_mask,
        gt_box,
        jittered_box,
    })
}

/// Dilates `gt` by a disk of `dilate_px` (skipped for 0), then sets each
/// pixel independently with probability `salt`.
pub fn corrupt_mask(gt: &BinaryMask, dilate_px: u32, salt: f64, seed: u64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&salt) {
        return Err(Error::InvalidParameter(format!(
            "salt fraction {salt} outside [0, 1]"
        )));
    }
    let mut out = if dilate_px > 0 {
        dilate(gt, &StructuringElement::disk(dilate_px)?)
    } else {
        gt.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for b in out.bits_mut() {
        if rng.random_bool(salt) {
            *b = true;
        }
    }
    Ok(out)
}

/// A distribution over scenes. Scene `index` under `seed` is always the same.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFamily {
    pub width: u32,
    pub height: u32,
    pub shapes: Vec<ShapeKind>,
    /// Range of the object's long side, in pixels.
    pub size: [f64; 2],
    /// Range of short side over long side.
    pub aspect: [f64; 2],
    /// Range of the object-background intensity gap, 0-255.
    pub contrast: [f64; 2],
    pub object_noise: f64,
    pub background_noise: f64,
    /// Largest background slope across the canvas.
    #[serde(default)]
    pub gradient: f64,
    #[serde(default)]
    pub distractors: [u32; 2],
    #[serde(default)]
    pub jitter: f64,
}

impl SceneFamily {
    /// Convex objects, many of them thin and rotated, inside 15%-jittered boxes.
    pub fn cfpg_benchmark() -> Self {
        Self {
            width: 96,
            height: 96,
            shapes: vec![
                ShapeKind::Rectangle,
                ShapeKind::RotatedRectangle,
                ShapeKind::Ellipse,
            ],
            size: [24.0, 56.0],
            aspect: [0.08, 0.9],
            contrast: [60.0, 120.0],
            object_noise: 8.0,
            background_noise: 10.0,
            gradient: 30.0,
            distractors: [0, 3],
            jitter: 0.15,
        }
    }

    /// Objects of every shape for mask refinement; boxes are not jittered.
    pub fn mbo_benchmark() -> Self {
        Self {
            width: 96,
            height: 96,
            shapes: vec![
                ShapeKind::Rectangle,
                ShapeKind::RotatedRectangle,
                ShapeKind::Ellipse,
                ShapeKind::LShape,
            ],
            size: [28.0, 60.0],
            aspect: [0.4, 0.9],
            contrast: [60.0, 120.0],
            object_noise: 8.0,
            background_noise: 10.0,
            gradient: 20.0,
            distractors: [0, 2],
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |r: [f64; 2], lo: f64| r[0] >= lo && r[0] <= r[1] && r[1].is_finite();
        if self.shapes.is_empty() {
            return Err(Error::InvalidSpec("no shapes to sample".into()));
        }
        if !range(self.size, 1.0)
            || !range(self.contrast, 0.0)
            || !range(self.aspect, 0.0)
            || self.aspect[1] > 1.0
            || self.aspect[0] == 0.0
        {
            return Err(Error::InvalidSpec(
                "size, aspect or contrast range is malformed".into(),
            ));
        }
        if self.distractors[0] > self.distractors[1] {
            return Err(Error::InvalidSpec("distractor range is malformed".into()));
        }
        if !(0.0..=MAX_JITTER).contains(&self.jitter) {
            return Err(Error::InvalidSpec(format!(
                "jitter {} outside [0, {MAX_JITTER}]",
                self.jitter
            )));
        }
        let reach = self.size[1] * (1.0 + self.aspect[1] * self.aspect[1]).sqrt();
        let room = f64::from(self.width.min(self.height)) - 4.0;
        if reach > room {
            return Err(Error::InvalidSpec(format!(
                "objects up to {reach:.1} px across do not fit a {}x{} canvas",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn sample(&self, seed: u64, index: u64) -> Result<SceneSpec> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);

        let kind = self.shapes[rng.random_range(0..self.shapes.len())];
        let long = rng.random_range(self.size[0]..=self.size[1]);
        let short = (long * rng.random_range(self.aspect[0]..=self.aspect[1])).max(3.0);
        let angle = rng.random_range(0.0..180.0);
        let shape = match kind {
            ShapeKind::Rectangle => Shape::Rectangle {
                width: long,
                height: short,
            },
            ShapeKind::RotatedRectangle => Shape::RotatedRectangle {
                width: long,
                height: short,
                angle_deg: angle,
            },
            ShapeKind::Ellipse => Shape::Ellipse {
                semi_major: long / 2.0,
                semi_minor: short / 2.0,
                angle_deg: angle,
            },
            ShapeKind::LShape => Shape::LShape {
                width: long,
                height: long * rng.random_range(0.7..=1.0),
                thickness: (short / 2.0).clamp(3.0, long / 2.0),
            },
        };

        let (ex, ey) = shape.half_extent();
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let cx = rng.random_range((ex + 1.0).min(w / 2.0)..=(w - 2.0 - ex).max(w / 2.0));
        let cy = rng.random_range((ey + 1.0).min(h / 2.0)..=(h - 2.0 - ey).max(h / 2.0));

        let background = rng.random_range(60.0..190.0);
        let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-15.0..15.0));
        let gap = rng.random_range(self.contrast[0]..=self.contrast[1]);
        let sign = if background + gap > 250.0 || (background - gap >= 5.0 && rng.random_bool(0.5))
        {
            -1.0
        } else {
            1.0
        };
        let background_color = tint.map(|t| background + t);
        let object_color = tint.map(|t| background + sign * gap + 0.5 * t);
        let slope = rng.random_range(0.0..=self.gradient);
        let slope_dir = rng.random_range(0.0..std::f64::consts::TAU);
        let distractors = rng.random_range(self.distractors[0]..=self.distractors[1]);

        Ok(SceneSpec {
            width: self.width,
            height: self.height,
            shape,
            center: Some((cx, cy)),
            object_color,
            object_noise: self.object_noise,
            background_color,
            background_noise: self.background_noise,
            gradient: (slope * slope_dir.cos(), slope * slope_dir.sin()),
            distractors,
            jitter: self.jitter,
            seed: rng.random(),
        })
    }

    pub fn generate(&self, seed: u64, index: u64) -> Result<Scene> {
        generate(&self.sample(seed, index)?)
    }
}
