//! Box-to-point prompt generation.
//!
//! The box contents are split into two colour clusters, the cluster that
//! dominates the box centre becomes a binary map, opening and closing clean
//! it, a distance-transform watershed separates touching blobs, and the
//! centroid of the most convex sufficiently large region is the prompt.
//!
//! Every degenerate case resolves to a flagged point instead of an error:
//!
//! | stage                         | result                         |
//! |-------------------------------|--------------------------------|
//! | fewer than two ROI colours    | box centre                     |
//! | empty map after cleanup       | box centre                     |
//! | no watershed marker           | box centre                     |
//! | no region above the threshold | centroid of the largest region |

use crate::clustering::{self, binarize_roi, kmeans_fit};
use crate::distance::distance_transform;
use crate::error::{Error, Result};
use crate::morphology::{close, open, StructuringElement};
use crate::raster::{crop_roi, roi_to_image, BoundingBox, PointPrompt, RasterImage};
use crate::regions::{self, centroid, connected_components, select_region};
use crate::watershed::{self, extract_markers, watershed};

#[derive(Debug, Clone, PartialEq)]
pub struct CfpgConfig {
    pub seed: u64,
    /// Marker threshold as a fraction of the peak distance.
    pub tau: f64,
    /// Absolute floor of the region area threshold, in pixels.
    pub min_area: f64,
    /// Relative floor of the region area threshold, as a fraction of the ROI.
    pub area_fraction: f64,
    /// Square radius for the opening and closing.
    pub morph_radius: u32,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for CfpgConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tau: watershed::DEFAULT_TAU,
            min_area: regions::MIN_AREA_THRESHOLD,
            area_fraction: regions::AREA_THRESHOLD_FRACTION,
            morph_radius: 1,
            kmeans_max_iter: clustering::DEFAULT_MAX_ITER,
            kmeans_tol: clustering::DEFAULT_TOL,
        }
    }
}

impl CfpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau {} outside (0, 1)",
                self.tau
            )));
        }
        if self.morph_radius == 0 {
            return Err(Error::InvalidParameter("morph_radius must be >= 1".into()));
        }
        if !(self.min_area >= 0.0 && self.area_fraction >= 0.0) {
            return Err(Error::InvalidParameter(
                "area thresholds must be >= 0".into(),
            ));
        }
        if self.kmeans_max_iter == 0 || !(self.kmeans_tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "invalid k-means stopping rule".into(),
            ));
        }
        Ok(())
    }

    pub fn area_threshold(&self, roi_area: u64) -> f64 {
        self.min_area.max(self.area_fraction * roi_area as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    UniformRoi,
    EmptyForeground,
    NoMarkers,
    NoRegion,
    BelowAreaThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfpgOutcome {
    /// Full-image coordinates.
    pub point: PointPrompt,
    pub fallback: Option<FallbackReason>,
}

/// The box-centre prompt, used when the pipeline cannot find a region.
pub fn box_center_point(bbox: &BoundingBox) -> PointPrompt {
    let (x, y) = bbox.center();
    PointPrompt::foreground(x, y)
}

pub fn generate_point(
    image: &RasterImage,
    bbox: &BoundingBox,
    cfg: &CfpgConfig,
) -> Result<PointPrompt> {
    generate_point_detailed(image, bbox, cfg).map(|o| o.point)
}

pub fn generate_point_detailed(
    image: &RasterImage,
    bbox: &BoundingBox,
    cfg: &CfpgConfig,
) -> Result<CfpgOutcome> {
    cfg.validate()?;
    let roi = crop_roi(image, bbox)?;

    let fallback = |reason| CfpgOutcome {
        point: box_center_point(bbox).with_fallback(true),
        fallback: Some(reason),
    };

    let pixels = roi.colors();
    let model = match kmeans_fit(&pixels, 2, cfg.seed, cfg.kmeans_max_iter, cfg.kmeans_tol) {
        Ok(m) => m,
        Err(Error::EmptyInput(_)) => return Ok(fallback(FallbackReason::UniformRoi)),
        Err(e) => return Err(e),
    };
    if model.centroids[0] == model.centroids[1] {
        return Ok(fallback(FallbackReason::UniformRoi));
    }

    let binary = binarize_roi(&roi, &model)?;
    let se = StructuringElement::square(cfg.morph_radius)?;
    let cleaned = close(&open(&binary, &se), &se);
    if !cleaned.any() {
        return Ok(fallback(FallbackReason::EmptyForeground));
    }

    let field = match distance_transform(&cleaned) {
        Ok(f) => f,
        Err(Error::NoBackground) => return Ok(fallback(FallbackReason::EmptyForeground)),
        Err(e) => return Err(e),
    };
    let markers = match extract_markers(&field, &cleaned, cfg.tau) {
        Ok(m) => m,
        Err(Error::EmptyMarkers) => return Ok(fallback(FallbackReason::NoMarkers)),
        Err(e) => return Err(e),
    };
    let labels = watershed(&field, &markers)?;
    let stats = connected_components(&labels);

    let Some(selected) = select_region(&stats, cfg.area_threshold(bbox.area())) else {
        return Ok(fallback(FallbackReason::NoRegion));
    };
    let local = centroid(selected.region).with_fallback(selected.fallback);
    Ok(CfpgOutcome {
        point: roi_to_image(&local, bbox)?,
        fallback: selected
            .fallback
            .then_some(FallbackReason::BelowAreaThreshold),
    })
}
