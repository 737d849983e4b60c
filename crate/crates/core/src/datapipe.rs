//! Dataset synthesis: compositing, augmentation and manifests.
//!
//! Manifests are JSON-lines files, one object per line:
//!
//! ```text
//! {"id": "cat_01", "image": "img/cat_01.png", "alpha": "alpha/cat_01.png",
//!  "category": "animal", "split": "test", "type": "SO"}
//! ```
//!
//! `id`, `image`, `alpha`, `category` and `split` are required; `fg`, `bg`,
//! `trimap` and `type` are optional. Paths are relative to the manifest's
//! directory. When `type` is absent it is derived from the alpha with
//! [`classify_type`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unimatte_tensor::{gaussian_blur2d, reflect_index, resize_bilinear, SplitMix64};

use crate::metrics::Category;
use crate::semantics::classify_type;
use crate::{io, AlphaMatte, ColorImage, Error, ImageType, Plane, Result};

pub const DEFAULT_BOKEH_SIGMA: f64 = 10.0;
pub const TRAIN_SIZE: usize = 320;

/// `I = α·F + (1 - α)·B` per channel.
pub fn composite(fg: &ColorImage, alpha: &AlphaMatte, bg: &ColorImage) -> Result<ColorImage> {
    let dims = alpha.dims();
    fg.ensure_dims(dims, "composite")?;
    bg.ensure_dims(dims, "composite")?;
    let (h, w) = dims;
    ColorImage::from_fn(h, w, |c, y, x| {
        let a = alpha.get(y, x);
        a * fg.get(c, y, x) + (1.0 - a) * bg.get(c, y, x)
    })
}

fn color_from_tensor(t: &unimatte_tensor::Tensor) -> Result<ColorImage> {
    ColorImage::from_tensor(t, 0)
}

pub fn resize_color(img: &ColorImage, h: usize, w: usize) -> Result<ColorImage> {
    if img.dims() == (h, w) {
        return Ok(img.clone());
    }
    let t = resize_bilinear(&img.to_tensor(), h, w)?;
    let out = color_from_tensor(&t)?;
    // Bilinear weights are convex; the clamp removes f32 rounding only.
    ColorImage::new(h, w, out.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

pub fn resize_plane(p: &Plane, h: usize, w: usize) -> Result<Plane> {
    if p.dims() == (h, w) {
        return Ok(p.clone());
    }
    let t = resize_bilinear(&p.to_tensor(), h, w)?;
    Ok(Plane::from_tensor(&t, 0, 0).map(|v| v.clamp(0.0, 1.0)))
}

fn crop_color(img: &ColorImage, y0: usize, x0: usize, h: usize, w: usize) -> Result<ColorImage> {
    ColorImage::from_fn(h, w, |c, y, x| img.get(c, y0 + y, x0 + x))
}

/// Brings a background to `(h, w)`: upscale (aspect preserved) until it
/// covers the target if it is smaller along either axis, then center-crop.
pub fn fit_background(bg: &ColorImage, dims: (usize, usize)) -> Result<ColorImage> {
    let (h, w) = dims;
    let (bh, bw) = bg.dims();
    let scale = (h as f64 / bh as f64).max(w as f64 / bw as f64);
    let scaled = if scale > 1.0 {
        let sh = ((bh as f64 * scale).ceil() as usize).max(h);
        let sw = ((bw as f64 * scale).ceil() as usize).max(w);
        resize_color(bg, sh, sw)?
    } else {
        bg.clone()
    };
    let (sh, sw) = scaled.dims();
    crop_color(&scaled, (sh - h) / 2, (sw - w) / 2, h, w)
}

/// Background blur: a Gaussian of the given sigma on every channel.
pub fn bokeh_augment(bg: &ColorImage, sigma: f64) -> Result<ColorImage> {
    let t = gaussian_blur2d(&bg.to_tensor(), sigma)?;
    color_from_tensor(&t)
}

pub fn flip_color(img: &ColorImage) -> ColorImage {
    let (h, w) = img.dims();
    ColorImage::from_fn(h, w, |c, y, x| img.get(c, y, w - 1 - x)).expect("same dims")
}

pub fn flip_plane(p: &Plane) -> Plane {
    let (h, w) = p.dims();
    Plane::from_fn(h, w, |y, x| p.get(y, w - 1 - x)).expect("same dims")
}

// ---------------------------------------------------------------------------
// Crop-resize augmentation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum CropSize {
    S640,
    S960,
    S1280,
}

impl CropSize {
    pub const ALL: [CropSize; 3] = [CropSize::S640, CropSize::S960, CropSize::S1280];

    pub fn px(self) -> usize {
        match self {
            CropSize::S640 => 640,
            CropSize::S960 => 960,
            CropSize::S1280 => 1280,
        }
    }
}

impl TryFrom<usize> for CropSize {
    type Error = Error;

    fn try_from(v: usize) -> Result<Self> {
        match v {
            640 => Ok(CropSize::S640),
            960 => Ok(CropSize::S960),
            1280 => Ok(CropSize::S1280),
            _ => Err(Error::InvalidValue(format!("crop size {v} not in {{640, 960, 1280}}"))),
        }
    }
}

impl From<CropSize> for usize {
    fn from(c: CropSize) -> usize {
        c.px()
    }
}

impl fmt::Display for CropSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.px())
    }
}

/// Square crop window on a canvas that was first reflect-padded to at
/// least `size` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    /// Padding added before the first row / column.
    pub pad_top: usize,
    pub pad_left: usize,
    /// Window origin on the padded canvas.
    pub y0: usize,
    pub x0: usize,
    pub size: usize,
}

impl CropWindow {
    /// Seeded window for a source of `dims`.
    pub fn sample(dims: (usize, usize), size: usize, seed: u64) -> Self {
        let (h, w) = dims;
        let (ph, pw) = (h.max(size), w.max(size));
        let mut rng = SplitMix64::new(seed);
        let y0 = rng.below((ph - size + 1) as u64) as usize;
        let x0 = rng.below((pw - size + 1) as u64) as usize;
        CropWindow {
            pad_top: (ph - h) / 2,
            pad_left: (pw - w) / 2,
            y0,
            x0,
            size,
        }
    }

    /// Source coordinate of window pixel `(y, x)`.
    fn source(&self, y: usize, x: usize, dims: (usize, usize)) -> (usize, usize) {
        let sy = (self.y0 + y) as isize - self.pad_top as isize;
        let sx = (self.x0 + x) as isize - self.pad_left as isize;
        (reflect_index(sy, dims.0), reflect_index(sx, dims.1))
    }

    pub fn apply_color(&self, img: &ColorImage, out: usize) -> Result<ColorImage> {
        let dims = img.dims();
        let cropped = ColorImage::from_fn(self.size, self.size, |c, y, x| {
            let (sy, sx) = self.source(y, x, dims);
            img.get(c, sy, sx)
        })?;
        resize_color(&cropped, out, out)
    }

    pub fn apply_plane(&self, p: &Plane, out: usize) -> Result<Plane> {
        let dims = p.dims();
        let cropped = Plane::from_fn(self.size, self.size, |y, x| {
            let (sy, sx) = self.source(y, x, dims);
            p.get(sy, sx)
        })?;
        resize_plane(&cropped, out, out)
    }
}

/// Seeded square crop of `crop` pixels followed by a bilinear resize to
/// `out × out`. Sources smaller than the crop are first center-padded by
/// symmetric reflection. Image and alpha share the same window.
pub fn crop_resize_augment(
    image: &ColorImage,
    alpha: &AlphaMatte,
    crop: CropSize,
    seed: u64,
    out: usize,
) -> Result<(ColorImage, AlphaMatte)> {
    image.ensure_dims(alpha.dims(), "crop_resize_augment")?;
    let win = CropWindow::sample(image.dims(), crop.px(), seed);
    Ok((
        win.apply_color(image, out)?,
        AlphaMatte::clamped(win.apply_plane(alpha, out)?),
    ))
}

// ---------------------------------------------------------------------------
// Composite specs

/// One synthetic training sample: a foreground, a background and the
/// augmentations to apply.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSpec {
    pub fg_id: String,
    pub bg_id: String,
    pub fg_type: ImageType,
    /// Background blur; only allowed for NS foregrounds.
    pub bokeh_sigma: Option<f64>,
    pub crop: Option<CropSize>,
    pub flip: bool,
    pub seed: u64,
}

impl CompositeSpec {
    pub fn output_id(&self) -> String {
        format!("{}__{}", self.fg_id, self.bg_id)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.bokeh_sigma {
            if self.fg_type != ImageType::Ns {
                return Err(Error::InvalidValue(format!(
                    "{}: bokeh requested for a {} foreground",
                    self.output_id(),
                    self.fg_type
                )));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidValue(format!("bokeh sigma {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Output of [`render`]: the composite and the layers it was built from,
/// all at the same geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSample {
    pub image: ColorImage,
    pub alpha: AlphaMatte,
    pub fg: ColorImage,
    pub bg: ColorImage,
}

/// Fits and optionally blurs the background, flips, composites and
/// optionally crop-resizes to [`TRAIN_SIZE`].
pub fn render(
    spec: &CompositeSpec,
    fg: &ColorImage,
    alpha: &AlphaMatte,
    bg: &ColorImage,
) -> Result<CompositeSample> {
    spec.validate()?;
    fg.ensure_dims(alpha.dims(), "render")?;
    let mut bg = fit_background(bg, alpha.dims())?;
    if let Some(sigma) = spec.bokeh_sigma {
        bg = bokeh_augment(&bg, sigma)?;
    }
    let (mut fg, mut alpha) = (fg.clone(), alpha.clone());
    if spec.flip {
        fg = flip_color(&fg);
        bg = flip_color(&bg);
        alpha = AlphaMatte::new(flip_plane(&alpha))?;
    }
    if let Some(crop) = spec.crop {
        let win = CropWindow::sample(alpha.dims(), crop.px(), spec.seed);
        fg = win.apply_color(&fg, TRAIN_SIZE)?;
        bg = win.apply_color(&bg, TRAIN_SIZE)?;
        alpha = AlphaMatte::clamped(win.apply_plane(&alpha, TRAIN_SIZE)?);
    }
    let image = composite(&fg, &alpha, &bg)?;
    Ok(CompositeSample {
        image,
        alpha,
        fg,
        bg,
    })
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest line as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub image: String,
    pub alpha: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trimap: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub image_type: Option<String>,
    pub category: String,
    pub split: Split,
}

/// A manifest line with paths resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub alpha: PathBuf,
    pub fg: Option<PathBuf>,
    pub bg: Option<PathBuf>,
    pub trimap: Option<PathBuf>,
    pub image_type: ImageType,
    pub category: Category,
    pub split: Split,
}

impl ManifestEntry {
    pub fn load_alpha(&self) -> Result<AlphaMatte> {
        io::read_alpha(&self.alpha)
    }

    pub fn load_image(&self) -> Result<ColorImage> {
        io::read_rgb(&self.image)
    }
}

/// Parses a manifest. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn ingest_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let err = |line: usize, msg: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(raw).map_err(|e| err(line, format!("malformed record: {e}")))?;
        if rec.id.is_empty() {
            return Err(err(line, "empty id".into()));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(err(line, format!("duplicate id `{}`", rec.id)));
        }
        let category: Category = rec.category.parse().map_err(|e: Error| err(line, e.to_string()))?;
        let resolve = |rel: &str| -> Result<PathBuf> {
            let p = dir.join(rel);
            if p.is_file() {
                Ok(p)
            } else {
                Err(err(line, format!("missing file {}", p.display())))
            }
        };
        let opt = |rel: &Option<String>| rel.as_deref().map(resolve).transpose();
        let image = resolve(&rec.image)?;
        let alpha = resolve(&rec.alpha)?;
        let (fg, bg, trimap) = (opt(&rec.fg)?, opt(&rec.bg)?, opt(&rec.trimap)?);
        let image_type = match &rec.image_type {
            Some(t) => t.parse().map_err(|e: Error| err(line, e.to_string()))?,
            None => classify_type(&io::read_alpha(&alpha).map_err(|e| err(line, e.to_string()))?),
        };
        entries.push(ManifestEntry {
            id: rec.id,
            image,
            alpha,
            fg,
            bg,
            trimap,
            image_type,
            category,
            split: rec.split,
        });
    }
    Ok(entries)
}

/// Serialises records one per line, in the given order.
pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Entry counts per type and category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub by_type: BTreeMap<ImageType, usize>,
    pub by_category: BTreeMap<Category, usize>,
    pub by_split: BTreeMap<Split, usize>,
}

pub fn dataset_stats(entries: &[ManifestEntry]) -> DatasetStats {
    let mut s = DatasetStats {
        total: entries.len(),
        by_type: ImageType::ALL.iter().map(|&t| (t, 0)).collect(),
        by_category: Category::REPORTED.iter().map(|&c| (c, 0)).collect(),
        by_split: BTreeMap::new(),
    };
    for e in entries {
        *s.by_type.entry(e.image_type).or_default() += 1;
        *s.by_category.entry(e.category).or_default() += 1;
        *s.by_split.entry(e.split).or_default() += 1;
    }
    s
}

impl fmt::Display for DatasetStats {
    /// Markdown table: type counts, then category counts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let types: Vec<String> = self.by_type.values().map(|v| v.to_string()).collect();
        writeln!(f, "| Total | SO | STM | NS |")?;
        writeln!(f, "| --- | --- | --- | --- |")?;
        writeln!(f, "| {} | {} |", self.total, types.join(" | "))?;
        writeln!(f)?;
        let names: Vec<&str> = self.by_category.keys().map(|c| c.label()).collect();
        let counts: Vec<String> = self.by_category.values().map(|v| v.to_string()).collect();
        writeln!(f, "| {} |", names.join(" | "))?;
        writeln!(f, "|{}", " --- |".repeat(names.len()))?;
        writeln!(f, "| {} |", counts.join(" | "))
    }
}
