//! Raster and JSON file access. Every write goes to a temporary file in the
//! destination directory first and is renamed into place.

use std::io::{Cursor, Write};
use std::path::Path;

use boxprompt_core::{BinaryMask, RasterImage};
use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn format_for(path: &Path) -> CliResult<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(CliError::io(
            path,
            "unsupported image extension (use .png, .pgm or .ppm)",
        )),
    }
}

fn load(path: &Path) -> CliResult<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    image::load_from_memory_with_format(&bytes, format_for(path)?)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_image(path: &Path) -> CliResult<RasterImage> {
    let rgb = load(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    RasterImage::new(w, h, rgb.into_raw()).map_err(|e| CliError::io(path, e))
}

/// Any non-zero sample is foreground.
pub fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    let gray = load(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    BinaryMask::from_bits(w, h, gray.into_raw().into_iter().map(|v| v != 0).collect())
        .map_err(|e| CliError::io(path, e))
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn encode(img: DynamicImage, path: &Path) -> CliResult<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, format_for(path)?)
        .map_err(|e| CliError::io(path, e))?;
    Ok(buf.into_inner())
}

/// 8-bit single channel, 0 and 255.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> CliResult<()> {
    let (w, h) = mask.dims();
    let raw = mask
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    let img = GrayImage::from_raw(w, h, raw).expect("mask buffer matches its size");
    atomic_write(path, &encode(DynamicImage::ImageLuma8(img), path)?)
}

pub fn write_image(path: &Path, image: &RasterImage) -> CliResult<()> {
    let (w, h) = image.dims();
    let img =
        RgbImage::from_raw(w, h, image.data().to_vec()).expect("raster buffer matches its size");
    atomic_write(path, &encode(DynamicImage::ImageRgb8(img), path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("invalid JSON: {e}")))
}
