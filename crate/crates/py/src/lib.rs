//! Python bindings. Images and masks cross the boundary as raw bytes.

use boxprompt_core::cfpg::{generate_point_detailed, CfpgConfig};
use boxprompt_core::mbo::{self, MboConfig};
use boxprompt_core::metrics::{self, EvalRecord, DEFAULT_THRESHOLDS};
use boxprompt_core::synth::{self, SceneFamily};
use boxprompt_core::{raster, Error};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Row-major 8-bit RGB image.
#[pyclass(frozen)]
struct Image(raster::RasterImage);

#[pymethods]
impl Image {
    #[new]
    fn new(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        raster::RasterImage::new(width, height, data.to_vec())
            .map(Image)
            .map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn pixel(&self, x: u32, y: u32) -> PyResult<(u8, u8, u8)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err("pixel outside the image"));
        }
        let [r, g, b] = self.0.pixel(x, y);
        Ok((r, g, b))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.data())
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// Binary mask; any non-zero byte is foreground.
#[pyclass(frozen)]
struct Mask(raster::BinaryMask);

#[pymethods]
impl Mask {
    #[new]
    fn new(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        raster::BinaryMask::from_bits(width, height, data.iter().map(|&v| v != 0).collect())
            .map(Mask)
            .map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn get(&self, x: u32, y: u32) -> PyResult<bool> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err("pixel outside the mask"));
        }
        Ok(self.0.get(x, y))
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    /// One byte per pixel, 0 or 255.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let raw: Vec<u8> = self
            .0
            .bits()
            .iter()
            .map(|&b| if b { 255 } else { 0 })
            .collect();
        PyBytes::new(py, &raw)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask({}x{}, {} set)",
            self.0.width(),
            self.0.height(),
            self.0.count()
        )
    }
}

/// Half-open pixel box `[x1, x2) x [y1, y2)`.
#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct BoundingBox(raster::BoundingBox);

#[pymethods]
impl BoundingBox {
    #[new]
    fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Self {
        BoundingBox(raster::BoundingBox::new(x1, y1, x2, y2))
    }

    #[getter]
    fn x1(&self) -> u32 {
        self.0.x1
    }

    #[getter]
    fn y1(&self) -> u32 {
        self.0.y1
    }

    #[getter]
    fn x2(&self) -> u32 {
        self.0.x2
    }

    #[getter]
    fn y2(&self) -> u32 {
        self.0.y2
    }

    fn center(&self) -> (f64, f64) {
        self.0.center()
    }

    fn to_list(&self) -> [u32; 4] {
        self.0.to_array()
    }

    fn __repr__(&self) -> String {
        let b = self.0;
        format!("BoundingBox({}, {}, {}, {})", b.x1, b.y1, b.x2, b.y2)
    }
}

#[pyclass(frozen)]
struct PointPrompt(raster::PointPrompt);

#[pymethods]
impl PointPrompt {
    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }

    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }

    #[getter]
    fn label(&self) -> u8 {
        self.0.label
    }

    #[getter]
    fn fallback(&self) -> bool {
        self.0.fallback
    }

    fn pixel(&self) -> (u32, u32) {
        self.0.pixel()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointPrompt(x={}, y={}, label={}, fallback={})",
            self.0.x,
            self.0.y,
            self.0.label,
            if self.0.fallback { "True" } else { "False" }
        )
    }
}

#[pyfunction]
#[pyo3(signature = (image, bbox, seed=0, tau=None))]
fn generate_point(
    image: &Image,
    bbox: &BoundingBox,
    seed: u64,
    tau: Option<f64>,
) -> PyResult<PointPrompt> {
    let mut cfg = CfpgConfig {
        seed,
        ..CfpgConfig::default()
    };
    if let Some(t) = tau {
        cfg.tau = t;
    }
    generate_point_detailed(&image.0, &bbox.0, &cfg)
        .map(|o| PointPrompt(o.point))
        .map_err(err)
}

/// Returns the refined mask and one dict per outer iteration.
#[pyfunction]
#[pyo3(signature = (image, mask, seed=0, max_outer_iters=5, components=5))]
fn refine_mask<'py>(
    py: Python<'py>,
    image: &Image,
    mask: &Mask,
    seed: u64,
    max_outer_iters: usize,
    components: usize,
) -> PyResult<(Mask, Vec<Bound<'py, PyDict>>)> {
    let cfg = MboConfig {
        seed,
        max_outer_iters,
        components,
        ..MboConfig::default()
    };
    let out = py
        .detach(|| mbo::refine_mask(&image.0, &mask.0, &cfg))
        .map_err(err)?;
    let log = out
        .log
        .iter()
        .map(|l| {
            let d = PyDict::new(py);
            d.set_item("iteration", l.iteration)?;
            d.set_item("energy_before", l.energy_before)?;
            d.set_item("energy_after", l.energy_after)?;
            d.set_item("changed", l.changed)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    Ok((Mask(out.mask), log))
}

#[pyfunction]
fn iou(pred: &Mask, gt: &Mask) -> PyResult<f64> {
    metrics::iou(&pred.0, &gt.0).map(|r| r.iou).map_err(err)
}

/// `records` holds `(intersection, union)` pairs; returns oiou, miou and pr@X.
#[pyfunction]
#[pyo3(signature = (records, thresholds=None))]
fn aggregate<'py>(
    py: Python<'py>,
    records: Vec<(u64, u64)>,
    thresholds: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    if records.iter().any(|&(i, u)| i > u) {
        return Err(PyValueError::new_err("intersection exceeds union"));
    }
    let recs: Vec<EvalRecord> = records
        .iter()
        .map(|&(i, u)| EvalRecord::from_counts("", i, u))
        .collect();
    let ts = thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let r = metrics::aggregate(&recs, &ts).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("oiou", r.oiou)?;
    d.set_item("miou", r.miou)?;
    d.set_item("n_samples", r.n_samples)?;
    for (t, v) in &r.precision.0 {
        d.set_item(format!("pr@{t}"), v)?;
    }
    Ok(d)
}

/// Scene `index` of a preset family: `(image, gt_mask, prompt_box)`.
#[pyfunction]
#[pyo3(signature = (preset="cfpg", seed=0, index=0))]
fn generate_scene(preset: &str, seed: u64, index: u64) -> PyResult<(Image, Mask, BoundingBox)> {
    let family = match preset {
        "cfpg" => SceneFamily::cfpg_benchmark(),
        "mbo" => SceneFamily::mbo_benchmark(),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    let s = family.generate(seed, index).map_err(err)?;
    Ok((Image(s.image), Mask(s.gt_mask), BoundingBox(s.jittered_box)))
}

#[pyfunction]
#[pyo3(signature = (mask, dilate=3, salt=0.05, seed=0))]
fn corrupt_mask(mask: &Mask, dilate: u32, salt: f64, seed: u64) -> PyResult<Mask> {
    synth::corrupt_mask(&mask.0, dilate, salt, seed)
        .map(Mask)
        .map_err(err)
}

#[pymodule]
fn boxprompt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Image>()?;
    m.add_class::<Mask>()?;
    m.add_class::<BoundingBox>()?;
    m.add_class::<PointPrompt>()?;
    m.add_function(wrap_pyfunction!(generate_point, m)?)?;
    m.add_function(wrap_pyfunction!(refine_mask, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt_mask, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
