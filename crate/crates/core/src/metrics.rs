//! Matting error metrics and their aggregation.
//!
//! SAD, connectivity and gradient errors are reported divided by 1000, the
//! magnitude convention of published matting benchmarks. MSE and MAD are
//! per-pixel means.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, ImageType, Plane, Result, Trimap};

pub const GRAD_SIGMA: f64 = 1.4;
pub const CONN_THETA: f64 = 0.15;
pub const CONN_STEP: f64 = 0.1;

/// Image categories of the benchmark, plus a catch-all that is excluded
/// from the per-category columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Animal,
    Human,
    Transparent,
    Plant,
    Furniture,
    Toy,
    Fruit,
    Other,
}

impl Category {
    /// The seven report columns, in report order.
    pub const REPORTED: [Category; 7] = [
        Category::Animal,
        Category::Human,
        Category::Transparent,
        Category::Plant,
        Category::Furniture,
        Category::Toy,
        Category::Fruit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Animal => "animal",
            Category::Human => "human",
            Category::Transparent => "transparent",
            Category::Plant => "plant",
            Category::Furniture => "furniture",
            Category::Toy => "toy",
            Category::Fruit => "fruit",
            Category::Other => "other",
        }
    }

    /// Column label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Category::Animal => "Animal",
            Category::Human => "Human",
            Category::Transparent => "Transp.",
            Category::Plant => "Plant",
            Category::Furniture => "Furni.",
            Category::Toy => "Toy",
            Category::Fruit => "Fruit",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim_end_matches('.').to_ascii_lowercase().as_str() {
            "animal" => Category::Animal,
            "human" | "portrait" => Category::Human,
            "transparent" | "transp" => Category::Transparent,
            "plant" => Category::Plant,
            "furniture" | "furni" => Category::Furniture,
            "toy" => Category::Toy,
            "fruit" => Category::Fruit,
            "other" => Category::Other,
            _ => return Err(Error::InvalidValue(format!("unknown category `{s}`"))),
        })
    }
}

fn check(pred: &Plane, gt: &Plane, op: &'static str) -> Result<()> {
    pred.ensure_same(gt, op)
}

fn abs_sum(pred: &Plane, gt: &Plane) -> f64 {
    pred.data().iter().zip(gt.data()).map(|(p, g)| (p - g).abs()).sum()
}

pub fn sad(pred: &Plane, gt: &Plane) -> Result<f64> {
    check(pred, gt, "sad")?;
    Ok(abs_sum(pred, gt) / 1000.0)
}

pub fn mse(pred: &Plane, gt: &Plane) -> Result<f64> {
    check(pred, gt, "mse")?;
    let s: f64 = pred.data().iter().zip(gt.data()).map(|(p, g)| (p - g) * (p - g)).sum();
    Ok(s / pred.len() as f64)
}

pub fn mad(pred: &Plane, gt: &Plane) -> Result<f64> {
    check(pred, gt, "mad")?;
    Ok(abs_sum(pred, gt) / pred.len() as f64)
}

/// SAD over the pixels where the trimap marks the transition region.
pub fn transition_sad(pred: &Plane, gt: &Plane, trimap: &Trimap) -> Result<f64> {
    check(pred, gt, "transition_sad")?;
    check(pred, trimap.plane(), "transition_sad")?;
    let s: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .zip(trimap.data())
        .filter(|(_, &t)| t == 0.5)
        .map(|((p, g), _)| (p - g).abs())
        .sum();
    Ok(s / 1000.0)
}

// ---------------------------------------------------------------------------
// Gradient error

/// 1-D factors of the Gaussian-derivative filter: the smoothing Gaussian and
/// its derivative, sampled over the half-width where the Gaussian falls
/// below 1e-2 of the normalisation, each scaled so the 2-D outer product has
/// unit L2 norm.
fn gauss_gradient_factors(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let eps = 1e-2;
    let s2pi = (2.0 * std::f64::consts::PI).sqrt();
    let half = (sigma * (-2.0 * (s2pi * sigma * eps).ln()).sqrt()).ceil() as isize;
    let gauss = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * s2pi);
    let g: Vec<f64> = (-half..=half).map(|u| gauss(u as f64)).collect();
    let d: Vec<f64> = (-half..=half)
        .map(|u| -(u as f64) * gauss(u as f64) / (sigma * sigma))
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (ng, nd) = (norm(&g), norm(&d));
    (g.iter().map(|v| v / ng).collect(), d.iter().map(|v| v / nd).collect())
}

/// Convolution along one axis with replicated borders.
fn conv_axis(x: &[f64], h: usize, w: usize, k: &[f64], along_x: bool) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for xx in 0..w {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                let off = j as isize - half;
                let v = if along_x {
                    x[y * w + (xx as isize - off).clamp(0, w as isize - 1) as usize]
                } else {
                    x[(y as isize - off).clamp(0, h as isize - 1) as usize * w + xx]
                };
                acc += kj * v;
            }
            out[y * w + xx] = acc;
        }
    }
    out
}

fn gradient_magnitude(p: &Plane, sigma: f64) -> Vec<f64> {
    let (h, w) = p.dims();
    let (g, d) = gauss_gradient_factors(sigma);
    let gx = conv_axis(&conv_axis(p.data(), h, w, &d, true), h, w, &g, false);
    let gy = conv_axis(&conv_axis(p.data(), h, w, &g, true), h, w, &d, false);
    gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect()
}

/// `Σ (|∇p| - |∇g|)² / 1000` with Gaussian-derivative gradients.
pub fn gradient_error(pred: &Plane, gt: &Plane, sigma: f64) -> Result<f64> {
    check(pred, gt, "gradient_error")?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidValue(format!("gradient sigma {sigma} must be positive")));
    }
    let (mp, mg) = (gradient_magnitude(pred, sigma), gradient_magnitude(gt, sigma));
    Ok(mp.iter().zip(&mg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 1000.0)
}

// ---------------------------------------------------------------------------
// Connectivity error

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Largest 4-connected component of `mask`. Among equally large components
/// the one reached first in raster order wins.
pub fn largest_component(mask: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut uf = UnionFind::new(h * w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask[i] {
                continue;
            }
            if x + 1 < w && mask[i + 1] {
                uf.union(i as u32, (i + 1) as u32);
            }
            if y + 1 < h && mask[i + w] {
                uf.union(i as u32, (i + w) as u32);
            }
        }
    }
    let mut best: Option<(u32, u32)> = None;
    for i in 0..h * w {
        if mask[i] {
            let r = uf.find(i as u32);
            let s = uf.size[r as usize];
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((r, s));
            }
        }
    }
    match best {
        None => vec![false; h * w],
        Some((root, _)) => (0..h * w)
            .map(|i| mask[i] && uf.find(i as u32) == root)
            .collect(),
    }
}

/// Connectivity error.
///
/// For thresholds `t_i = i·step`, `i = 1..=round(1/step)`, the source region
/// is the largest 4-connected component of `{p >= t_i} ∩ {g >= t_i}`. A pixel's
/// level `l` is `t_{i-1}` at the first threshold where it drops out of the
/// source region (1 if it never does). With `d = value - l`, the degree of
/// connectivity is `φ = 1 - d` when `d >= theta` and 1 otherwise. The error is
/// `Σ |φ_p - φ_g| / 1000`.
pub fn connectivity_error(pred: &Plane, gt: &Plane, theta: f64, step: f64) -> Result<f64> {
    check(pred, gt, "connectivity_error")?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidValue(format!("connectivity step {step} not in (0, 1]")));
    }
    let (h, w) = pred.dims();
    let (p, g) = (pred.data(), gt.data());
    let steps = (1.0 / step).round() as usize;
    let mut level: Vec<Option<f64>> = vec![None; h * w];
    for i in 1..=steps {
        let t = i as f64 * step;
        let both: Vec<bool> = p.iter().zip(g).map(|(&a, &b)| a >= t && b >= t).collect();
        let omega = largest_component(&both, h, w);
        for (l, &inside) in level.iter_mut().zip(&omega) {
            if l.is_none() && !inside {
                *l = Some((i - 1) as f64 * step);
            }
        }
    }
    let phi = |v: f64, l: f64| {
        let d = v - l;
        if d >= theta {
            1.0 - d
        } else {
            1.0
        }
    };
    let s: f64 = level
        .iter()
        .zip(p.iter().zip(g))
        .map(|(l, (&a, &b))| {
            let l = l.unwrap_or(1.0);
            (phi(a, l) - phi(b, l)).abs()
        })
        .sum();
    Ok(s / 1000.0)
}

// ---------------------------------------------------------------------------
// Records and aggregation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub id: String,
    pub sad: f64,
    pub mse: f64,
    pub mad: f64,
    pub conn: f64,
    pub grad: f64,
    pub sad_transition: f64,
    #[serde(rename = "type")]
    pub image_type: ImageType,
    pub category: Category,
    pub height: usize,
    pub width: usize,
}

pub fn evaluate_image(
    id: &str,
    pred: &Plane,
    gt: &Plane,
    gt_trimap: &Trimap,
    image_type: ImageType,
    category: Category,
) -> Result<MetricRecord> {
    Ok(MetricRecord {
        id: id.to_string(),
        sad: sad(pred, gt)?,
        mse: mse(pred, gt)?,
        mad: mad(pred, gt)?,
        conn: connectivity_error(pred, gt, CONN_THETA, CONN_STEP)?,
        grad: gradient_error(pred, gt, GRAD_SIGMA)?,
        sad_transition: transition_sad(pred, gt, gt_trimap)?,
        image_type,
        category,
        height: pred.h(),
        width: pred.w(),
    })
}

/// Whole-image metric means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WholeImage {
    pub sad: f64,
    pub mse: f64,
    pub mad: f64,
    pub conn: f64,
    pub grad: f64,
}

/// A report column: mean SAD over the matching records, absent when no
/// record falls in the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: String,
    pub count: usize,
    pub sad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
    pub whole: WholeImage,
    pub transition_sad: f64,
    /// SO, STM, NS in that order.
    pub by_type: Vec<GroupMean>,
    /// Unweighted mean of the present type means.
    pub type_avg: f64,
    /// The seven reported categories in column order.
    pub by_category: Vec<GroupMean>,
    /// Unweighted mean of the present category means; absent when every
    /// record is uncategorised.
    pub category_avg: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Aggregates records after sorting them by id, so the result does not
/// depend on input order.
pub fn aggregate(mut records: Vec<MetricRecord>) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(Error::InvalidValue("cannot aggregate an empty record set".into()));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let col = |f: fn(&MetricRecord) -> f64| mean(records.iter().map(f)).expect("nonempty");
    let whole = WholeImage {
        sad: col(|r| r.sad),
        mse: col(|r| r.mse),
        mad: col(|r| r.mad),
        conn: col(|r| r.conn),
        grad: col(|r| r.grad),
    };
    let transition_sad = col(|r| r.sad_transition);
    let group = |name: &str, pick: &dyn Fn(&MetricRecord) -> bool| {
        let sel: Vec<f64> = records.iter().filter(|r| pick(r)).map(|r| r.sad).collect();
        GroupMean {
            group: name.to_string(),
            count: sel.len(),
            sad: mean(sel),
        }
    };
    let by_type: Vec<GroupMean> = ImageType::ALL
        .iter()
        .map(|&t| group(t.as_str(), &|r| r.image_type == t))
        .collect();
    let by_category: Vec<GroupMean> = Category::REPORTED
        .iter()
        .map(|&c| group(c.label(), &|r| r.category == c))
        .collect();
    let type_avg = mean(by_type.iter().filter_map(|g| g.sad)).expect("some type is present");
    let category_avg = mean(by_category.iter().filter_map(|g| g.sad));
    Ok(MetricReport {
        records,
        whole,
        transition_sad,
        by_type,
        type_avg,
        by_category,
        category_avg,
    })
}
