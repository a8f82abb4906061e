//! Training-free helpers around promptable segmentation of remote-sensing imagery.
//!
//! Two engines sit at the center of the crate:
//!
//! * [`cfpg`] turns a coarse bounding box into a single foreground point by
//!   clustering the box contents, cleaning the binary map, splitting it with a
//!   distance-transform watershed and picking the most convex region.
//! * [`mbo`] refines a coarse mask with colour Gaussian mixtures and an
//!   exact s-t min-cut, iterating until the labeling stops changing.
//!
//! The remaining modules are the building blocks those engines share, plus
//! evaluation [`metrics`] and a deterministic scene generator in [`synth`].

pub mod cfpg;
pub mod clustering;
pub mod distance;
pub mod error;
pub mod gmm;
pub mod graphcut;
pub mod maxflow;
pub mod mbo;
pub mod metrics;
pub mod morphology;
pub mod raster;
pub mod regions;
pub mod synth;
pub mod watershed;

pub use error::{Error, Result};
pub use raster::{BinaryMask, BoundingBox, PointPrompt, RasterImage};
