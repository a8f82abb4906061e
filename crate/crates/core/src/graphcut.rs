//! Binary labeling energy on the pixel lattice and its exact minimisation.
//!
//! The source terminal is foreground. A pixel left on the source side pays
//! its sink capacity (the foreground data cost), a sink-side pixel pays its
//! source capacity, and each 8-neighbour pair split by the cut pays its
//! n-link.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::gmm::GmmModel;
use crate::maxflow::FlowGraph;
use crate::raster::{BinaryMask, RasterImage};

/// Capacity that pins a seed pixel to its terminal.
pub const HARD: f64 = 1e9;
pub const DEFAULT_GAMMA: f64 = 50.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Forward half of the 8-neighbourhood: `(dx, dy, 1 / distance)`.
pub const FORWARD_NEIGHBORS: [(i64, i64, f64); 4] = [
    (1, 0, 1.0),
    (0, 1, 1.0),
    (1, 1, FRAC_1_SQRT_2),
    (-1, 1, FRAC_1_SQRT_2),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub gamma: f64,
    pub lambda: f64,
    /// Contrast scale. `None` derives it from the image.
    pub beta: Option<f64>,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            lambda: DEFAULT_LAMBDA,
            beta: None,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.gamma) || !ok(self.lambda) || !self.beta.is_none_or(ok) {
            return Err(Error::InvalidParameter(
                "gamma, lambda and beta must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve_beta(&self, image: &RasterImage) -> f64 {
        self.beta.unwrap_or_else(|| contrast_beta(image))
    }
}

fn neighbor(x: u32, y: u32, dx: i64, dy: i64, width: u32, height: u32) -> Option<usize> {
    let nx = i64::from(x) + dx;
    let ny = i64::from(y) + dy;
    (nx >= 0 && ny >= 0 && nx < i64::from(width) && ny < i64::from(height))
        .then(|| ny as usize * width as usize + nx as usize)
}

fn sq_diff(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

/// `1 / (2 * mean squared colour difference)` over all 8-neighbour pairs.
/// A flat image has no contrast to scale, and gets 1.
pub fn contrast_beta(image: &RasterImage) -> f64 {
    let (w, h) = image.dims();
    let colors = image.colors();
    let mut total = 0.0;
    let mut pairs = 0u64;
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            for &(dx, dy, _) in &FORWARD_NEIGHBORS {
                if let Some(j) = neighbor(x, y, dx, dy, w, h) {
                    total += sq_diff(&colors[i], &colors[j]);
                    pairs += 1;
                }
            }
        }
    }
    if total > 0.0 {
        pairs as f64 / (2.0 * total)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimapLabel {
    Free,
    HardFg,
    HardBg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    width: u32,
    height: u32,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn free(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![TrimapLabel::Free; width as usize * height as usize],
        }
    }

    pub fn from_labels(width: u32, height: u32, labels: Vec<TrimapLabel>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "{} trimap labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Hard foreground where `hard_fg` is set, hard background where
    /// `hard_bg` is set, free elsewhere. Overlaps resolve to foreground.
    pub fn from_masks(hard_fg: &BinaryMask, hard_bg: &BinaryMask) -> Result<Self> {
        hard_bg.ensure_dims(hard_fg.width(), hard_fg.height())?;
        let labels = hard_fg
            .bits()
            .iter()
            .zip(hard_bg.bits())
            .map(|(&f, &b)| match (f, b) {
                (true, _) => TrimapLabel::HardFg,
                (false, true) => TrimapLabel::HardBg,
                _ => TrimapLabel::Free,
            })
            .collect();
        Ok(Self {
            width: hard_fg.width(),
            height: hard_fg.height(),
            labels,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> TrimapLabel {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn respects(&self, mask: &BinaryMask) -> bool {
        mask.dims() == self.dims()
            && self.labels.iter().zip(mask.bits()).all(|(l, &m)| match l {
                TrimapLabel::HardFg => m,
                TrimapLabel::HardBg => !m,
                TrimapLabel::Free => true,
            })
    }
}

/// Per-pixel data costs `(foreground, background)`: negative log of the
/// colour posterior after normalising the two mixture densities against each
/// other. Always non-negative; per pixel it differs from `-log P_F`,
/// `-log P_B` by a shared constant, so every cut compares the same way.
pub fn data_costs(fg: &GmmModel, bg: &GmmModel, z: &[f64; 3]) -> (f64, f64) {
    let lf = fg.log_prob(z);
    let lb = bg.log_prob(z);
    let hi = lf.max(lb);
    if hi == f64::NEG_INFINITY {
        return (std::f64::consts::LN_2, std::f64::consts::LN_2);
    }
    let total = hi + ((lf - hi).exp() + (lb - hi).exp()).ln();
    ((total - lf).max(0.0), (total - lb).max(0.0))
}

/// Pairwise penalty for splitting two neighbours.
pub fn smoothness(
    params: &EnergyParams,
    beta: f64,
    a: &[f64; 3],
    b: &[f64; 3],
    inv_dist: f64,
) -> f64 {
    params.lambda * params.gamma * inv_dist * (-beta * sq_diff(a, b)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    width: u32,
    height: u32,
    source: Vec<f64>,
    sink: Vec<f64>,
    /// Per pixel, one capacity per entry of [`FORWARD_NEIGHBORS`]; zero off the frame.
    n_links: Vec<[f64; 4]>,
}

impl GridGraph {
    pub fn from_capacities(
        width: u32,
        height: u32,
        source: Vec<f64>,
        sink: Vec<f64>,
        mut n_links: Vec<[f64; 4]>,
    ) -> Result<Self> {
        let n = width as usize * height as usize;
        if source.len() != n || sink.len() != n || n_links.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{}/{}/{} capacities for {n} pixels",
                source.len(),
                sink.len(),
                n_links.len()
            )));
        }
        let bad = |v: &f64| !(*v >= 0.0 && v.is_finite());
        if source.iter().any(bad) || sink.iter().any(bad) || n_links.iter().flatten().any(bad) {
            return Err(Error::InvalidParameter(
                "capacities must be finite and >= 0".into(),
            ));
        }
        for y in 0..height {
            for x in 0..width {
                let i = (y * width + x) as usize;
                for (k, &(dx, dy, _)) in FORWARD_NEIGHBORS.iter().enumerate() {
                    if neighbor(x, y, dx, dy, width, height).is_none() {
                        n_links[i][k] = 0.0;
                    }
                }
            }
        }
        Ok(Self {
            width,
            height,
            source,
            sink,
            n_links,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn source_caps(&self) -> &[f64] {
        &self.source
    }

    pub fn sink_caps(&self) -> &[f64] {
        &self.sink
    }

    pub fn n_links(&self) -> &[[f64; 4]] {
        &self.n_links
    }

    /// Capacity between `i` and its neighbour at `(dx, dy)`, in either
    /// direction; `None` if that pair is not an 8-neighbour edge.
    pub fn n_link(&self, x: u32, y: u32, dx: i64, dy: i64) -> Option<f64> {
        let j = neighbor(x, y, dx, dy, self.width, self.height)?;
        let i = (y * self.width + x) as usize;
        if let Some(k) = FORWARD_NEIGHBORS
            .iter()
            .position(|&(fx, fy, _)| (fx, fy) == (dx, dy))
        {
            return Some(self.n_links[i][k]);
        }
        let k = FORWARD_NEIGHBORS
            .iter()
            .position(|&(fx, fy, _)| (fx, fy) == (-dx, -dy))?;
        Some(self.n_links[j][k])
    }

    /// Cost of a labeling (`true` = foreground/source side).
    pub fn cut_energy(&self, mask: &BinaryMask) -> Result<f64> {
        mask.ensure_dims(self.width, self.height)?;
        let bits = mask.bits();
        let mut e = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let i = (y * self.width + x) as usize;
                e += if bits[i] {
                    self.sink[i]
                } else {
                    self.source[i]
                };
                for (k, &(dx, dy, _)) in FORWARD_NEIGHBORS.iter().enumerate() {
                    if let Some(j) = neighbor(x, y, dx, dy, self.width, self.height) {
                        if bits[i] != bits[j] {
                            e += self.n_links[i][k];
                        }
                    }
                }
            }
        }
        Ok(e)
    }

    /// Minimum cut: the flow value and the source-side pixels as a mask.
    /// Pixels not separable from either terminal fall on the sink side.
    pub fn solve(&self) -> (f64, BinaryMask) {
        let (w, h) = self.dims();
        let n = w as usize * h as usize;
        let mut g = FlowGraph::with_capacity(n, 4 * n);
        for i in 0..n {
            g.add_tweights(i, self.source[i], self.sink[i]);
        }
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                for (k, &(dx, dy, _)) in FORWARD_NEIGHBORS.iter().enumerate() {
                    let c = self.n_links[i][k];
                    if c > 0.0 {
                        if let Some(j) = neighbor(x, y, dx, dy, w, h) {
                            g.add_edge(i, j, c, c);
                        }
                    }
                }
            }
        }
        let flow = g.max_flow();
        let mask = BinaryMask::from_bits(w, h, g.source_side()).expect("sizes agree");
        (flow, mask)
    }
}

pub fn build_graph(
    image: &RasterImage,
    fg: &GmmModel,
    bg: &GmmModel,
    trimap: &Trimap,
    params: &EnergyParams,
) -> Result<GridGraph> {
    params.validate()?;
    let (w, h) = image.dims();
    if trimap.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            found: trimap.dims(),
        });
    }
    let beta = params.resolve_beta(image);
    let colors = image.colors();
    let n = colors.len();
    let mut source = vec![0.0; n];
    let mut sink = vec![0.0; n];
    for (i, z) in colors.iter().enumerate() {
        match trimap.labels[i] {
            TrimapLabel::HardFg => source[i] = HARD,
            TrimapLabel::HardBg => sink[i] = HARD,
            TrimapLabel::Free => {
                let (cost_fg, cost_bg) = data_costs(fg, bg, z);
                source[i] = cost_bg;
                sink[i] = cost_fg;
            }
        }
    }
    let mut n_links = vec![[0.0; 4]; n];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            for (k, &(dx, dy, inv)) in FORWARD_NEIGHBORS.iter().enumerate() {
                if let Some(j) = neighbor(x, y, dx, dy, w, h) {
                    n_links[i][k] = smoothness(params, beta, &colors[i], &colors[j], inv);
                }
            }
        }
    }
    Ok(GridGraph {
        width: w,
        height: h,
        source,
        sink,
        n_links,
    })
}

/// Minimum-energy labeling under the trimap; `true` = foreground.
pub fn segment(
    image: &RasterImage,
    fg: &GmmModel,
    bg: &GmmModel,
    trimap: &Trimap,
    params: &EnergyParams,
) -> Result<BinaryMask> {
    Ok(build_graph(image, fg, bg, trimap, params)?.solve().1)
}
