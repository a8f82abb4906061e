//! Exact Euclidean distance transform (separable lower-envelope method).

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Per-pixel Euclidean distance from a foreground pixel to the nearest
/// background pixel, zero on the background.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: u32,
    height: u32,
    squared: Vec<f64>,
    d: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.d[y as usize * self.width as usize + x as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    /// Squared distances; integral, so exact.
    pub fn squared(&self) -> &[f64] {
        &self.squared
    }

    pub fn max(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Builds a field directly from distances, e.g. for hand-made watershed inputs.
    pub fn from_values(width: u32, height: u32, d: Vec<f64>) -> Result<Self> {
        if d.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "expected {} distances, got {}",
                width as usize * height as usize,
                d.len()
            )));
        }
        if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "distances must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            squared: d.iter().map(|v| v * v).collect(),
            d,
        })
    }
}

/// Squared distance to the lower envelope of parabolas rooted at the finite
/// entries of `f`, written into `out`.
fn envelope_1d(f: &[f64], out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let Some(&v) = sites.last() else {
                sites.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let vf = v as f64;
            let s = ((fq + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf);
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(s);
                break;
            }
        }
    }

    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < sites.len() && bounds[k + 1] < qf {
            k += 1;
        }
        let dv = qf - sites[k] as f64;
        *o = dv * dv + f[sites[k]];
    }
}

pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    if mask.all() {
        return Err(Error::NoBackground);
    }

    let mut grid: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&fg| if fg { f64::INFINITY } else { 0.0 })
        .collect();

    let mut sites = Vec::new();
    let mut bounds = Vec::new();

    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        envelope_1d(&col, &mut col_out, &mut sites, &mut bounds);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }

    let mut row_out = vec![0.0; w];
    for y in 0..h {
        envelope_1d(
            &grid[y * w..(y + 1) * w],
            &mut row_out,
            &mut sites,
            &mut bounds,
        );
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }

    let d = grid.iter().map(|v| v.sqrt()).collect();
    Ok(DistanceField {
        width: mask.width(),
        height: mask.height(),
        squared: grid,
        d,
    })
}
