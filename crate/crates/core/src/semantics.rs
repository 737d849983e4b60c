//! Trimaps and the unified semantic representation.
//!
//! A trimap marks background (0), transition (0.5) and foreground (1). The
//! unified representation rewrites it according to the image type:
//!
//! | type | rule            | resulting map |
//! |------|-----------------|---------------|
//! | SO   | `U = T`         | trimap        |
//! | STM  | `U = 1.5T - T²` | duomap `{0, 0.5}` |
//! | NS   | `U = 0.5`       | unimap        |

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Plane, Result};

/// Alpha at or above this counts as solid foreground.
pub const FG_THRESHOLD: f64 = 0.95;
/// Alpha at or below this counts as background.
pub const BG_THRESHOLD: f64 = 0.05;
/// Default erosion / dilation radius for trimap synthesis, in pixels.
pub const DEFAULT_RADIUS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImageType {
    /// Salient opaque foreground.
    #[serde(rename = "SO")]
    So,
    /// Salient transparent or meticulous foreground.
    #[serde(rename = "STM")]
    Stm,
    /// Non-salient foreground.
    #[serde(rename = "NS")]
    Ns,
}

impl ImageType {
    pub const ALL: [ImageType; 3] = [ImageType::So, ImageType::Stm, ImageType::Ns];

    pub fn as_str(self) -> &'static str {
        match self {
            ImageType::So => "SO",
            ImageType::Stm => "STM",
            ImageType::Ns => "NS",
        }
    }
}

impl fmt::Display for ImageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImageType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SO" => Ok(ImageType::So),
            "STM" => Ok(ImageType::Stm),
            "NS" => Ok(ImageType::Ns),
            _ => Err(Error::InvalidValue(format!("unknown image type `{s}`"))),
        }
    }
}

/// Foreground opacity map with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte(Plane);

impl AlphaMatte {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("alpha value {v} outside [0, 1]")));
        }
        Ok(AlphaMatte(plane))
    }

    /// Clamps into `[0, 1]`; NaN becomes 0.
    pub fn clamped(plane: Plane) -> Self {
        AlphaMatte(plane.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }
}

impl Deref for AlphaMatte {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

fn check_ternary(plane: &Plane, what: &str) -> Result<()> {
    match plane.data().iter().find(|&&v| v != 0.0 && v != 0.5 && v != 1.0) {
        Some(v) => Err(Error::InvalidValue(format!(
            "{what} value {v} not in {{0, 0.5, 1}}"
        ))),
        None => Ok(()),
    }
}

/// Map over `{0, 0.5, 1}`: background, transition, foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct Trimap(Plane);

impl Trimap {
    pub fn new(plane: Plane) -> Result<Self> {
        check_ternary(&plane, "trimap")?;
        Ok(Trimap(plane))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    /// Mask of the transition region (`T = 0.5`).
    pub fn transition_mask(&self) -> Vec<bool> {
        self.0.data().iter().map(|&v| v == 0.5).collect()
    }
}

impl Deref for Trimap {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

/// Unified semantic representation together with the type that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedRep {
    plane: Plane,
    declared_type: ImageType,
}

impl UnifiedRep {
    /// Validates the per-type value constraints: STM maps never contain 1 and
    /// NS maps are constant 0.5.
    pub fn new(plane: Plane, declared_type: ImageType) -> Result<Self> {
        check_ternary(&plane, "unified representation")?;
        let ok = match declared_type {
            ImageType::So => true,
            ImageType::Stm => plane.data().iter().all(|&v| v != 1.0),
            ImageType::Ns => plane.data().iter().all(|&v| v == 0.5),
        };
        if !ok {
            return Err(Error::InvalidValue(format!(
                "map is not a valid {declared_type} representation"
            )));
        }
        Ok(UnifiedRep {
            plane,
            declared_type,
        })
    }

    pub fn declared_type(&self) -> ImageType {
        self.declared_type
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }
}

impl Deref for UnifiedRep {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.plane
    }
}

// ---------------------------------------------------------------------------
// Morphology

/// Half-widths of the rows of a discrete disk `dy² + dx² <= r²`.
fn disk_rows(r: usize) -> Vec<(isize, usize)> {
    let r = r as isize;
    (-r..=r)
        .map(|dy| {
            let mut a = 0usize;
            while ((a + 1) * (a + 1)) as isize + dy * dy <= r * r {
                a += 1;
            }
            (dy, a)
        })
        .collect()
}

/// Per-row prefix counts of set pixels, `w + 1` entries per row.
fn row_prefix(mask: &[bool], h: usize, w: usize) -> Vec<usize> {
    let mut pre = vec![0usize; h * (w + 1)];
    for y in 0..h {
        for x in 0..w {
            pre[y * (w + 1) + x + 1] = pre[y * (w + 1) + x] + mask[y * w + x] as usize;
        }
    }
    pre
}

/// Morphology by a disk, one row-window lookup per disk row. Neighbours
/// outside the image are ignored by both operations.
fn morph(mask: &[bool], h: usize, w: usize, r: usize, erode: bool) -> Vec<bool> {
    if r == 0 {
        return mask.to_vec();
    }
    let pre = row_prefix(mask, h, w);
    let rows = disk_rows(r);
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = erode;
            for &(dy, a) in &rows {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                let x0 = x.saturating_sub(a);
                let x1 = (x + a).min(w - 1);
                let base = yy as usize * (w + 1);
                let count = pre[base + x1 + 1] - pre[base + x0];
                if erode && count != x1 - x0 + 1 {
                    acc = false;
                    break;
                }
                if !erode && count > 0 {
                    acc = true;
                    break;
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn erode_disk(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    morph(mask, h, w, r, true)
}

pub fn dilate_disk(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    morph(mask, h, w, r, false)
}

/// Trimap by erosion and dilation of the thresholded alpha.
///
/// Foreground is `{α >= 0.95}` eroded by a disk of `erode_px`; background is
/// everything outside `{α > 0.05}` dilated by a disk of `dilate_px`; the rest
/// is transition.
pub fn trimap_from_alpha(alpha: &AlphaMatte, erode_px: usize, dilate_px: usize) -> Trimap {
    let (h, w) = alpha.dims();
    let fg: Vec<bool> = alpha.data().iter().map(|&a| a >= FG_THRESHOLD).collect();
    let any: Vec<bool> = alpha.data().iter().map(|&a| a > BG_THRESHOLD).collect();
    let fg = erode_disk(&fg, h, w, erode_px);
    let any = dilate_disk(&any, h, w, dilate_px);
    let data = fg
        .iter()
        .zip(&any)
        .map(|(&f, &a)| if f { 1.0 } else if !a { 0.0 } else { 0.5 })
        .collect();
    Trimap(Plane::new(h, w, data).expect("dims from a valid alpha"))
}

/// Pointwise unified value of a trimap value `t` for an image type.
pub fn unify_value(t: f64, ty: ImageType) -> f64 {
    match ty {
        ImageType::So => t,
        ImageType::Stm => 1.5 * t - t * t,
        ImageType::Ns => 0.5,
    }
}

pub fn unify(trimap: &Trimap, ty: ImageType) -> UnifiedRep {
    UnifiedRep {
        plane: trimap.map(|t| unify_value(t, ty)),
        declared_type: ty,
    }
}

/// Heuristic type from the alpha histogram.
///
/// With `f1` the fraction of pixels with `α >= 0.95` and `f0` the fraction with
/// `α <= 0.05`: NS when `f0 < 0.05`, otherwise STM when `f1 < 0.05`, otherwise SO.
pub fn classify_type(alpha: &AlphaMatte) -> ImageType {
    let n = alpha.len() as f64;
    let f1 = alpha.data().iter().filter(|&&a| a >= FG_THRESHOLD).count() as f64 / n;
    let f0 = alpha.data().iter().filter(|&&a| a <= BG_THRESHOLD).count() as f64 / n;
    if f0 < 0.05 {
        ImageType::Ns
    } else if f1 < 0.05 {
        ImageType::Stm
    } else {
        ImageType::So
    }
}

// ---------------------------------------------------------------------------
// Class encoding

pub const CLASS_BG: u8 = 0;
pub const CLASS_TRANSITION: u8 = 1;
pub const CLASS_FG: u8 = 2;

/// Per-pixel class labels `{0: background, 1: transition, 2: foreground}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl ClassMap {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::InvalidValue(format!(
                "class map {h}x{w} cannot hold {} labels",
                data.len()
            )));
        }
        if let Some(c) = data.iter().find(|&&c| c > CLASS_FG) {
            return Err(Error::InvalidValue(format!("invalid class {c}")));
        }
        Ok(ClassMap { h, w, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Exact map `{0, 0.5, 1} -> {0, 1, 2}`.
pub fn rep_to_classes(u: &Plane) -> Result<ClassMap> {
    let data = u
        .data()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(CLASS_BG)
            } else if v == 0.5 {
                Ok(CLASS_TRANSITION)
            } else if v == 1.0 {
                Ok(CLASS_FG)
            } else {
                Err(Error::InvalidValue(format!("value {v} not in {{0, 0.5, 1}}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ClassMap::new(u.h(), u.w(), data)
}

pub fn class_value(c: u8) -> f64 {
    c as f64 * 0.5
}

pub fn classes_to_rep(c: &ClassMap) -> Plane {
    Plane::new(c.h, c.w, c.data.iter().map(|&v| class_value(v)).collect())
        .expect("class map dims are nonzero")
}

/// `(iou, accuracy)` of a predicted class map.
///
/// Accuracy is the fraction of matching pixels. IoU is averaged over the
/// classes present in the ground truth.
pub fn semantic_iou_accuracy(pred: &ClassMap, gt: &ClassMap) -> Result<(f64, f64)> {
    if pred.dims() != gt.dims() {
        return Err(Error::SizeMismatch {
            op: "semantic_iou_accuracy",
            left: pred.dims(),
            right: gt.dims(),
        });
    }
    let mut inter = [0usize; 3];
    let mut union = [0usize; 3];
    let mut present = [false; 3];
    let mut correct = 0usize;
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        present[g as usize] = true;
        if p == g {
            correct += 1;
            inter[g as usize] += 1;
            union[g as usize] += 1;
        } else {
            union[g as usize] += 1;
            union[p as usize] += 1;
        }
    }
    let classes: Vec<usize> = (0..3).filter(|&c| present[c]).collect();
    let iou = classes
        .iter()
        .map(|&c| inter[c] as f64 / union[c] as f64)
        .sum::<f64>()
        / classes.len() as f64;
    Ok((iou, correct as f64 / gt.data.len() as f64))
}
