//! 8-bit PNG codecs for mattes, trimaps and RGB images.
//!
//! Alphas map `v / 255`; writing rounds `a * 255`. Trimaps and unified
//! representations use the three codes 0, 128 and 255 for 0, 0.5 and 1 and
//! reject any other byte on read.

use std::fs;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use crate::{AlphaMatte, ColorImage, Error, ImageType, Plane, Result, Trimap, UnifiedRep};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn save(path: &Path, bytes: &[u8], w: usize, h: usize, color: ColorType) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, ImageFormat::Png).map_err(
        |source| Error::Image {
            path: path.to_path_buf(),
            source,
        },
    )
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads any single- or multi-channel image as 8-bit luma.
pub fn read_gray(path: &Path) -> Result<Plane> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Plane::new(
        h as usize,
        w as usize,
        img.into_raw().into_iter().map(|b| b as f64 / 255.0).collect(),
    )
}

pub fn read_alpha(path: &Path) -> Result<AlphaMatte> {
    AlphaMatte::new(read_gray(path)?)
}

pub fn write_alpha(path: &Path, alpha: &Plane) -> Result<()> {
    let bytes: Vec<u8> = alpha.data().iter().map(|&v| to_byte(v)).collect();
    save(path, &bytes, alpha.w(), alpha.h(), ColorType::L8)
}

fn decode_ternary(path: &Path) -> Result<Plane> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img
        .into_raw()
        .into_iter()
        .map(|b| match b {
            0 => Ok(0.0),
            128 => Ok(0.5),
            255 => Ok(1.0),
            other => Err(Error::InvalidValue(format!(
                "{}: byte {other} is not a trimap code (0, 128, 255)",
                path.display()
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Plane::new(h as usize, w as usize, data)
}

pub fn read_trimap(path: &Path) -> Result<Trimap> {
    Trimap::new(decode_ternary(path)?)
}

pub fn read_rep(path: &Path, ty: ImageType) -> Result<UnifiedRep> {
    UnifiedRep::new(decode_ternary(path)?, ty)
}

/// Writes a `{0, 0.5, 1}` map as 0 / 128 / 255.
pub fn write_ternary(path: &Path, plane: &Plane) -> Result<()> {
    let bytes = plane
        .data()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 0.5 {
                Ok(128)
            } else if v == 1.0 {
                Ok(255)
            } else {
                Err(Error::InvalidValue(format!("value {v} not in {{0, 0.5, 1}}")))
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    save(path, &bytes, plane.w(), plane.h(), ColorType::L8)
}

pub fn read_rgb(path: &Path) -> Result<ColorImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    ColorImage::from_fn(h, w, |c, y, x| raw[(y * w + x) * 3 + c] as f64 / 255.0)
}

pub fn write_rgb(path: &Path, img: &ColorImage) -> Result<()> {
    let (h, w) = img.dims();
    let mut bytes = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                bytes.push(to_byte(img.get(c, y, x)));
            }
        }
    }
    save(path, &bytes, w, h, ColorType::Rgb8)
}
