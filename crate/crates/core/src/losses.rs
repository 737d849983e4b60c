//! Fusion rule and training losses.
//!
//! Every loss returns its value together with the analytic gradient with
//! respect to the prediction, laid out like the prediction. Computation is
//! in `f64` so the gradients can be checked against central differences.

use unimatte_tensor::Shape;

use crate::semantics::ClassMap;
use crate::{AlphaMatte, ColorImage, Error, Plane, Result};

/// Charbonnier epsilon used by the alpha and composition losses.
pub const CHARBONNIER_EPS: f64 = 1e-6;
/// Default number of Laplacian pyramid levels.
pub const LAPLACIAN_LEVELS: usize = 5;

/// Loss value and gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Pointwise fusion `α = (1 - 2|U - 0.5|)·M + 2|U - 0.5|·U`.
#[inline]
pub fn fuse_value(u: f64, m: f64) -> f64 {
    let d = 2.0 * (u - 0.5).abs();
    (1.0 - d) * m + d * u
}

/// Fuses a unified representation (or any map in `[0, 1]`) with the raw
/// matting output.
pub fn fuse(u: &Plane, m: &Plane) -> Result<AlphaMatte> {
    u.ensure_same(m, "fuse")?;
    for (what, p) in [("U", u), ("M", m)] {
        if let Some(v) = p.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("fuse: {what} value {v} outside [0, 1]")));
        }
    }
    let data = u
        .data()
        .iter()
        .zip(m.data())
        .map(|(&u, &m)| fuse_value(u, m))
        .collect();
    // A convex combination of values in [0, 1]; the clamp only absorbs rounding.
    Ok(AlphaMatte::clamped(Plane::new(u.h(), u.w(), data)?))
}

fn charbonnier(r: f64, eps: f64) -> (f64, f64) {
    let s = (r * r + eps * eps).sqrt();
    (s, r / s)
}

/// Mean Charbonnier penalty `sqrt((p - g)² + eps²)`.
pub fn alpha_loss(pred: &Plane, gt: &Plane, eps: f64) -> Result<LossGrad> {
    pred.ensure_same(gt, "alpha_loss")?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| {
            let (v, d) = charbonnier(p - g, eps);
            value += v;
            d / n
        })
        .collect();
    Ok(LossGrad {
        value: value / n,
        grad,
    })
}

/// Charbonnier penalty of the compositing residual `αF + (1 - α)B - I`,
/// averaged over pixels and channels.
pub fn composition_loss(
    alpha: &Plane,
    fg: &ColorImage,
    bg: &ColorImage,
    image: &ColorImage,
    eps: f64,
) -> Result<LossGrad> {
    let dims = alpha.dims();
    fg.ensure_dims(dims, "composition_loss")?;
    bg.ensure_dims(dims, "composition_loss")?;
    image.ensure_dims(dims, "composition_loss")?;
    let n = alpha.len();
    let denom = (3 * n) as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for c in 0..3 {
        let (f, b, i) = (fg.channel(c), bg.channel(c), image.channel(c));
        for (k, g) in grad.iter_mut().enumerate() {
            let a = alpha.data()[k];
            let (v, d) = charbonnier(a * f[k] + (1.0 - a) * b[k] - i[k], eps);
            value += v;
            *g += d * (f[k] - b[k]) / denom;
        }
    }
    Ok(LossGrad {
        value: value / denom,
        grad,
    })
}

// ---------------------------------------------------------------------------
// Laplacian pyramid

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable 5-tap binomial blur with replicate padding. With `transpose`
/// the adjoint map is applied instead.
fn blur5(x: &[f64], h: usize, w: usize, transpose: bool) -> Vec<f64> {
    let mut tmp = vec![0.0; h * w];
    let mut out = vec![0.0; h * w];
    // Rows then columns; the adjoint runs the two passes with scatter.
    if !transpose {
        for y in 0..h {
            for x0 in 0..w {
                tmp[y * w + x0] = (0..5)
                    .map(|k| BINOMIAL5[k] * x[y * w + clamp_idx(x0 as isize + k as isize - 2, w)])
                    .sum();
            }
        }
        for y in 0..h {
            for x0 in 0..w {
                out[y * w + x0] = (0..5)
                    .map(|k| BINOMIAL5[k] * tmp[clamp_idx(y as isize + k as isize - 2, h) * w + x0])
                    .sum();
            }
        }
    } else {
        for y in 0..h {
            for x0 in 0..w {
                for (k, wk) in BINOMIAL5.iter().enumerate() {
                    tmp[clamp_idx(y as isize + k as isize - 2, h) * w + x0] += wk * x[y * w + x0];
                }
            }
        }
        for y in 0..h {
            for x0 in 0..w {
                for (k, wk) in BINOMIAL5.iter().enumerate() {
                    out[y * w + clamp_idx(x0 as isize + k as isize - 2, w)] += wk * tmp[y * w + x0];
                }
            }
        }
    }
    out
}

/// 2×2 mean pooling, dropping a trailing odd row or column.
fn pool2(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (nh, nw) = (h / 2, w / 2);
    let mut out = vec![0.0; nh * nw];
    for y in 0..nh {
        for x0 in 0..nw {
            let i = 2 * y * w + 2 * x0;
            out[y * nw + x0] = (x[i] + x[i + 1] + x[i + w] + x[i + w + 1]) / 4.0;
        }
    }
    out
}

fn pool2_transpose(g: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (nh, nw) = (h / 2, w / 2);
    let mut out = vec![0.0; h * w];
    for y in 0..nh {
        for x0 in 0..nw {
            let v = g[y * nw + x0] / 4.0;
            let i = 2 * y * w + 2 * x0;
            out[i] += v;
            out[i + 1] += v;
            out[i + w] += v;
            out[i + w + 1] += v;
        }
    }
    out
}

/// One pyramid level: values and `(h, w)`.
pub type PyramidLevel = (Vec<f64>, usize, usize);

/// Laplacian pyramid of `levels` levels: band-pass levels
/// `G_i - blur(G_i)` with `G_{i+1} = pool2(blur(G_i))`, and the low-pass
/// residual `G_levels` as the last level.
pub fn laplacian_pyramid(x: &Plane, levels: usize) -> Result<Vec<PyramidLevel>> {
    let (h, w) = x.dims();
    check_pyramid(h, w, levels)?;
    let mut pyr = Vec::with_capacity(levels);
    let (mut cur, mut ch, mut cw) = (x.data().to_vec(), h, w);
    for _ in 1..levels {
        let b = blur5(&cur, ch, cw, false);
        let band = cur.iter().zip(&b).map(|(a, c)| a - c).collect();
        pyr.push((band, ch, cw));
        cur = pool2(&b, ch, cw);
        ch /= 2;
        cw /= 2;
    }
    pyr.push((cur, ch, cw));
    Ok(pyr)
}

fn check_pyramid(h: usize, w: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidValue("laplacian pyramid needs at least one level".into()));
    }
    let min = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if h < min || w < min {
        return Err(Error::ImageTooSmall(format!(
            "{h}x{w} is smaller than {min}x{min} required for {levels} pyramid levels"
        )));
    }
    Ok(())
}

/// `Σ_i 2^(i-1) · mean|Lap_i(pred) - Lap_i(gt)|` over `levels` levels.
///
/// The gradient back-propagates the sign of every level difference through
/// the adjoints of the blur and pooling maps.
pub fn laplacian_loss(pred: &Plane, gt: &Plane, levels: usize) -> Result<LossGrad> {
    pred.ensure_same(gt, "laplacian_loss")?;
    let lp = laplacian_pyramid(pred, levels)?;
    let lg = laplacian_pyramid(gt, levels)?;
    let mut value = 0.0;
    // Per-level gradient of the loss with respect to the level values.
    let mut level_grads = Vec::with_capacity(levels);
    for (i, ((a, _, _), (b, _, _))) in lp.iter().zip(&lg).enumerate() {
        let weight = (1u64 << i) as f64;
        let n = a.len() as f64;
        let mut sum = 0.0;
        let g: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = x - y;
                sum += d.abs();
                // Subgradient 0 at d = 0.
                weight * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 } / n
            })
            .collect();
        value += weight * sum / n;
        level_grads.push(g);
    }
    // Walk back from the residual: lap_i = G_i - B_i, G_{i+1} = pool2(B_i).
    let mut d_next = level_grads.pop().expect("at least one level");
    for (i, r) in level_grads.iter().enumerate().rev() {
        let (_, h, w) = lp[i];
        let mut d_b = pool2_transpose(&d_next, h, w);
        for (db, ri) in d_b.iter_mut().zip(r) {
            *db -= ri;
        }
        let mut d_g = blur5(&d_b, h, w, true);
        for (dg, ri) in d_g.iter_mut().zip(r) {
            *dg += ri;
        }
        d_next = d_g;
    }
    Ok(LossGrad {
        value,
        grad: d_next,
    })
}

// ---------------------------------------------------------------------------
// Cross-entropy

/// Mean pixelwise `-log softmax(logits)[target]` over a `[n, 3, h, w]`
/// logit array; one class map per batch item.
pub fn semantic_ce(logits: &[f64], shape: Shape, targets: &[ClassMap]) -> Result<LossGrad> {
    if shape.c != 3 || logits.len() != shape.numel() {
        return Err(Error::InvalidValue(format!(
            "semantic_ce: expected [n, 3, h, w] logits, got {:?} with {} values",
            shape.dims(),
            logits.len()
        )));
    }
    if targets.len() != shape.n {
        return Err(Error::InvalidValue(format!(
            "semantic_ce: {} targets for batch of {}",
            targets.len(),
            shape.n
        )));
    }
    let p = shape.plane();
    let count = (shape.n * p) as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (n, t) in targets.iter().enumerate() {
        if t.dims() != (shape.h, shape.w) {
            return Err(Error::SizeMismatch {
                op: "semantic_ce",
                left: (shape.h, shape.w),
                right: t.dims(),
            });
        }
        let base = n * 3 * p;
        for (i, &class) in t.data().iter().enumerate() {
            let z = [logits[base + i], logits[base + p + i], logits[base + 2 * p + i]];
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e = z.map(|v| (v - max).exp());
            let sum: f64 = e.iter().sum();
            value += sum.ln() + max - z[class as usize];
            for c in 0..3 {
                let onehot = (c == class as usize) as u8 as f64;
                grad[base + c * p + i] = (e[c] / sum - onehot) / count;
            }
        }
    }
    Ok(LossGrad {
        value: value / count,
        grad,
    })
}

// ---------------------------------------------------------------------------
// Bundle

/// Weights of the four loss terms; all default to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub laplacian: f64,
    pub composition: f64,
    pub semantic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            laplacian: 1.0,
            composition: 1.0,
            semantic: 1.0,
        }
    }
}

/// Everything the loss terms consume for one image.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    /// Raw matting output `M`.
    pub matting: &'a Plane,
    /// Final fused alpha `α`.
    pub alpha: &'a Plane,
    pub gt_alpha: &'a Plane,
    pub fg: &'a ColorImage,
    pub bg: &'a ColorImage,
    pub image: &'a ColorImage,
    /// `[1, 3, h, w]` semantic logits.
    pub logits: &'a [f64],
    pub target: &'a ClassMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBundle {
    pub alpha_loss: f64,
    pub laplacian_loss: f64,
    pub composition_loss: f64,
    pub semantic_ce: f64,
    pub total: f64,
}

impl LossBundle {
    /// Alpha and Laplacian terms are summed over `M` and `α`; the composition
    /// term uses `α`.
    pub fn compute(inputs: &LossInputs<'_>, weights: LossWeights, levels: usize) -> Result<Self> {
        let alpha_loss = alpha_loss(inputs.matting, inputs.gt_alpha, CHARBONNIER_EPS)?.value
            + alpha_loss(inputs.alpha, inputs.gt_alpha, CHARBONNIER_EPS)?.value;
        let laplacian_loss = laplacian_loss(inputs.matting, inputs.gt_alpha, levels)?.value
            + laplacian_loss(inputs.alpha, inputs.gt_alpha, levels)?.value;
        let composition_loss =
            composition_loss(inputs.alpha, inputs.fg, inputs.bg, inputs.image, CHARBONNIER_EPS)?.value;
        let (h, w) = inputs.target.dims();
        let semantic_ce = semantic_ce(
            inputs.logits,
            Shape::new(1, 3, h, w),
            std::slice::from_ref(inputs.target),
        )?
        .value;
        let total = weights.alpha * alpha_loss
            + weights.laplacian * laplacian_loss
            + weights.composition * composition_loss
            + weights.semantic * semantic_ce;
        Ok(LossBundle {
            alpha_loss,
            laplacian_loss,
            composition_loss,
            semantic_ce,
            total,
        })
    }
}
