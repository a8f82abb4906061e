//! Marker extraction and marker-controlled watershed over a distance field.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::morphology::{dilate, StructuringElement};
use crate::raster::BinaryMask;

/// Ridge between two basins, and foreground no basin reached.
pub const BOUNDARY: i32 = -1;
pub const BACKGROUND: i32 = 0;
/// Not yet claimed by any marker. Only present in marker maps.
pub const UNLABELED: i32 = i32::MIN;

pub const DEFAULT_TAU: f64 = 0.5;

/// Signed per-pixel labels: `-1` boundary, `0` background, `>= 1` region id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<i32>,
}

impl LabelMap {
    pub fn from_labels(width: u32, height: u32, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} labels, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
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

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> i32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Largest region id, 0 when there are none.
    pub fn max_label(&self) -> i32 {
        self.labels.iter().copied().max().unwrap_or(0).max(0)
    }
}

fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// 4-connected components of `bits`, numbered 1.. in raster-scan order of
/// their first pixel. Returns the per-pixel labels (0 outside) and the count.
pub fn label_components(width: u32, height: u32, bits: &[bool]) -> (Vec<i32>, i32) {
    let (w, h) = (width as usize, height as usize);
    let mut labels = vec![0i32; w * h];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbors4(i, w, h) {
                if bits[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, next)
}

/// Foreground markers are the 4-connected components of `d > tau * max(d)`;
/// the background marker is everything farther than a 5x5 square from the
/// binary foreground. Remaining pixels are [`UNLABELED`].
pub fn extract_markers(field: &DistanceField, binary: &BinaryMask, tau: f64) -> Result<LabelMap> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "marker threshold {tau} outside (0, 1)"
        )));
    }
    binary.ensure_dims(field.width(), field.height())?;
    let peak = field.max();
    if peak <= 0.0 {
        return Err(Error::EmptyMarkers);
    }
    let cut = tau * peak;
    let core: Vec<bool> = field.values().iter().map(|&d| d > cut).collect();
    let (mut labels, _) = label_components(field.width(), field.height(), &core);

    let near = dilate(binary, &StructuringElement::square(2)?);
    for (l, &n) in labels.iter_mut().zip(near.bits()) {
        if *l == 0 {
            *l = if n { UNLABELED } else { BACKGROUND };
        }
    }
    LabelMap::from_labels(field.width(), field.height(), labels)
}

/// Priority flood from the markers on altitude `-d`.
///
/// Region labels spread only over pixels with `d > 0`, deepest first, ties
/// broken by insertion order. A pixel whose claimed neighbours carry two
/// different region ids becomes [`BOUNDARY`]. Afterwards, unclaimed pixels
/// with `d > 0` are [`BOUNDARY`] and unclaimed pixels with `d = 0` are
/// [`BACKGROUND`].
pub fn watershed(field: &DistanceField, markers: &LabelMap) -> Result<LabelMap> {
    if markers.dims() != field.dims() {
        return Err(Error::DimensionMismatch {
            expected: field.dims(),
            found: markers.dims(),
        });
    }
    if !markers.labels().iter().any(|&l| l >= 1) {
        return Err(Error::EmptyMarkers);
    }

    let (w, h) = (field.width() as usize, field.height() as usize);
    let d = field.values();
    let mut out = markers.labels().to_vec();
    let mut queued = vec![false; w * h];
    // Max-heap on (depth, earliest insertion). Non-negative floats order like
    // their bit patterns.
    let mut heap: BinaryHeap<(u64, Reverse<u64>, usize)> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut enqueue = |j: usize, out: &[i32], queued: &mut [bool], heap: &mut BinaryHeap<_>| {
        if out[j] == UNLABELED && d[j] > 0.0 && !queued[j] {
            queued[j] = true;
            heap.push((d[j].to_bits(), Reverse(seq), j));
            seq += 1;
        }
    };
    for i in 0..w * h {
        if out[i] >= 1 {
            for j in neighbors4(i, w, h) {
                enqueue(j, &out, &mut queued, &mut heap);
            }
        }
    }

    while let Some((_, _, i)) = heap.pop() {
        let mut claim = None;
        let mut conflict = false;
        for j in neighbors4(i, w, h) {
            let l = out[j];
            if l >= 1 {
                match claim {
                    None => claim = Some(l),
                    Some(c) if c != l => conflict = true,
                    _ => {}
                }
            }
        }
        if conflict {
            out[i] = BOUNDARY;
            continue;
        }
        let Some(label) = claim else {
            out[i] = BOUNDARY;
            continue;
        };
        out[i] = label;
        for j in neighbors4(i, w, h) {
            enqueue(j, &out, &mut queued, &mut heap);
        }
    }

    for (l, &dv) in out.iter_mut().zip(d) {
        if *l == UNLABELED {
            *l = if dv > 0.0 { BOUNDARY } else { BACKGROUND };
        }
    }
    LabelMap::from_labels(field.width(), field.height(), out)
}
