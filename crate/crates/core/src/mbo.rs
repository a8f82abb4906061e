//! Iterative mask refinement with colour mixtures and graph cuts.
//!
//! The eroded input mask is hard foreground, everything beyond a wider
//! dilation is hard background, and the band between them is relabelled by
//! alternating mixture fits with minimum cuts until few pixels change.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::{self, GmmFitConfig, GmmModel};
use crate::graphcut::{self, EnergyParams, Trimap, FORWARD_NEIGHBORS};
use crate::morphology::{dilate, erode, seed_erosion_radius, StructuringElement};
use crate::raster::{BinaryMask, Color, RasterImage};

#[derive(Debug, Clone, PartialEq)]
pub struct MboConfig {
    /// Erosion radius as a fraction of the mask's shorter bounding-box side.
    pub erosion_fraction: f64,
    /// Band dilation radius as a multiple of the erosion radius.
    pub band_factor: u32,
    pub components: usize,
    pub max_outer_iters: usize,
    /// Stop once fewer than this fraction of pixels change.
    pub epsilon: f64,
    pub energy: EnergyParams,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    pub reg_eps: f64,
    /// Cap on the pixels each mixture is fitted to (evenly strided); 0 = all.
    pub max_fit_pixels: usize,
    pub seed: u64,
}

impl Default for MboConfig {
    fn default() -> Self {
        Self {
            erosion_fraction: 0.02,
            band_factor: 3,
            components: gmm::DEFAULT_COMPONENTS,
            max_outer_iters: 5,
            epsilon: 0.001,
            energy: EnergyParams::default(),
            gmm_max_iter: gmm::DEFAULT_MAX_ITER,
            gmm_tol: gmm::DEFAULT_TOL,
            reg_eps: gmm::DEFAULT_REG_EPS,
            max_fit_pixels: 20_000,
            seed: 0,
        }
    }
}

impl MboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_outer_iters must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if !(self.erosion_fraction >= 0.0) || self.band_factor == 0 {
            return Err(Error::InvalidParameter(
                "invalid erosion or band rule".into(),
            ));
        }
        if self.components == 0 || self.gmm_max_iter == 0 || !(self.reg_eps > 0.0) {
            return Err(Error::InvalidParameter("invalid mixture settings".into()));
        }
        self.energy.validate()
    }

    fn fit_config(&self) -> GmmFitConfig {
        GmmFitConfig {
            components: self.components,
            max_iter: self.gmm_max_iter,
            tol: self.gmm_tol,
            reg_eps: self.reg_eps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Energy of the incoming labeling under this iteration's mixtures.
    pub energy_before: f64,
    /// Energy of the cut result under the same mixtures.
    pub energy_after: f64,
    pub changed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateReason {
    EmptyMask,
    FullFrame,
    EmptySeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MboOutcome {
    pub mask: BinaryMask,
    pub log: Vec<IterationLog>,
    pub degenerate: Option<DegenerateReason>,
    pub erosion_radius: u32,
    pub band_radius: u32,
}

/// Data cost of every pixel under its label plus the smoothness cost of every
/// 8-neighbour pair the labeling splits.
pub fn labeling_energy(
    image: &RasterImage,
    mask: &BinaryMask,
    fg: &GmmModel,
    bg: &GmmModel,
    params: &EnergyParams,
) -> Result<f64> {
    params.validate()?;
    let (w, h) = image.dims();
    mask.ensure_dims(w, h)?;
    let beta = params.resolve_beta(image);
    let colors = image.colors();
    let bits = mask.bits();
    let mut e = 0.0;
    for (z, &b) in colors.iter().zip(bits) {
        let (cost_fg, cost_bg) = graphcut::data_costs(fg, bg, z);
        e += if b { cost_fg } else { cost_bg };
    }
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            for &(dx, dy, inv) in &FORWARD_NEIGHBORS {
                let nx = i64::from(x) + dx;
                let ny = i64::from(y) + dy;
                if nx < 0 || ny < 0 || nx >= i64::from(w) || ny >= i64::from(h) {
                    continue;
                }
                let j = ny as usize * w as usize + nx as usize;
                if bits[i] != bits[j] {
                    e += graphcut::smoothness(params, beta, &colors[i], &colors[j], inv);
                }
            }
        }
    }
    Ok(e)
}

fn gather(colors: &[Color], mask: &BinaryMask, want: bool, cap: usize) -> Vec<Color> {
    let picked: Vec<Color> = colors
        .iter()
        .zip(mask.bits())
        .filter(|&(_, &b)| b == want)
        .map(|(c, _)| *c)
        .collect();
    if cap == 0 || picked.len() <= cap {
        return picked;
    }
    let step = picked.len() as f64 / cap as f64;
    (0..cap)
        .map(|k| picked[(k as f64 * step) as usize])
        .collect()
}

fn fit_side(pixels: &[Color], previous: Option<&GmmModel>, cfg: &GmmFitConfig) -> Result<GmmModel> {
    let report = match previous {
        Some(model) => gmm::refit(model, pixels, cfg)?,
        None => {
            let cfg = GmmFitConfig {
                components: cfg.components.min(pixels.len()),
                ..*cfg
            };
            gmm::fit(pixels, &cfg)?
        }
    };
    Ok(report.model)
}

pub fn refine_mask(
    image: &RasterImage,
    initial: &BinaryMask,
    cfg: &MboConfig,
) -> Result<MboOutcome> {
    cfg.validate()?;
    let (w, h) = image.dims();
    initial.ensure_dims(w, h)?;

    let passthrough = |reason, r_e, r_d| MboOutcome {
        mask: initial.clone(),
        log: Vec::new(),
        degenerate: Some(reason),
        erosion_radius: r_e,
        band_radius: r_d,
    };
    if !initial.any() {
        return Ok(passthrough(DegenerateReason::EmptyMask, 0, 0));
    }
    if initial.all() {
        return Ok(passthrough(DegenerateReason::FullFrame, 0, 0));
    }

    let r_e = seed_erosion_radius(initial, cfg.erosion_fraction);
    let r_d = cfg.band_factor * r_e;
    let hard_fg = erode(initial, &StructuringElement::disk(r_e)?);
    if !hard_fg.any() {
        return Ok(passthrough(DegenerateReason::EmptySeed, r_e, r_d));
    }
    let hard_bg = dilate(initial, &StructuringElement::disk(r_d)?).complement();
    let trimap = Trimap::from_masks(&hard_fg, &hard_bg)?;

    let colors = image.colors();
    let fit_cfg = cfg.fit_config();
    let total = colors.len() as f64;
    let mut current = initial.clone();
    let mut models: Option<(GmmModel, GmmModel)> = None;
    let mut log = Vec::new();

    for iteration in 1..=cfg.max_outer_iters {
        // The first fit trusts only the eroded seed as foreground.
        let fg_source = if models.is_none() { &hard_fg } else { &current };
        let fg_pixels = gather(&colors, fg_source, true, cfg.max_fit_pixels);
        let bg_pixels = gather(&colors, fg_source, false, cfg.max_fit_pixels);
        if fg_pixels.is_empty() || bg_pixels.is_empty() {
            break;
        }
        let fg = fit_side(&fg_pixels, models.as_ref().map(|m| &m.0), &fit_cfg)?;
        let bg = fit_side(&bg_pixels, models.as_ref().map(|m| &m.1), &fit_cfg)?;

        let graph = graphcut::build_graph(image, &fg, &bg, &trimap, &cfg.energy)?;
        let (_, next) = graph.solve();
        let energy_before = labeling_energy(image, &current, &fg, &bg, &cfg.energy)?;
        let energy_after = labeling_energy(image, &next, &fg, &bg, &cfg.energy)?;
        let changed = next.xor_count(&current);
        log.push(IterationLog {
            iteration,
            energy_before,
            energy_after,
            changed,
        });
        current = next;
        models = Some((fg, bg));
        if (changed as f64) / total < cfg.epsilon {
            break;
        }
    }

    Ok(MboOutcome {
        mask: current,
        log,
        degenerate: None,
        erosion_radius: r_e,
        band_radius: r_d,
    })
}
