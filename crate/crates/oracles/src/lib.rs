//! Brute-force reference implementations.
//!
//! Everything here works on plain `f64` slices with explicit dimensions and is
//! written for clarity, never speed. Nothing in this crate may call into the
//! production crates; tests compare the two.

use std::collections::VecDeque;

/// Dims of an NCHW array.
pub type Dims = [usize; 4];

fn idx(d: Dims, n: usize, c: usize, y: usize, x: usize) -> usize {
    ((n * d[1] + c) * d[2] + y) * d[3] + x
}

// ---------------------------------------------------------------------------
// Kernels

/// Direct 7-loop cross-correlation with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    xd: Dims,
    w: &[f64],
    wd: Dims,
    bias: Option<&[f64]>,
    stride: usize,
    pad: usize,
    dil: usize,
) -> (Vec<f64>, Dims) {
    let oh = (xd[2] + 2 * pad - dil * (wd[2] - 1) - 1) / stride + 1;
    let ow = (xd[3] + 2 * pad - dil * (wd[3] - 1) - 1) / stride + 1;
    let od = [xd[0], wd[0], oh, ow];
    let mut out = vec![0.0; od.iter().product()];
    for n in 0..xd[0] {
        for oc in 0..wd[0] {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.map_or(0.0, |b| b[oc]);
                    for ic in 0..wd[1] {
                        for ky in 0..wd[2] {
                            for kx in 0..wd[3] {
                                let iy = (oy * stride + ky * dil) as isize - pad as isize;
                                let ix = (ox * stride + kx * dil) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= xd[2] as isize || ix >= xd[3] as isize {
                                    continue;
                                }
                                acc += x[idx(xd, n, ic, iy as usize, ix as usize)]
                                    * w[idx(wd, oc, ic, ky, kx)];
                            }
                        }
                    }
                    out[idx(od, n, oc, oy, ox)] = acc;
                }
            }
        }
    }
    (out, od)
}

/// Max pool by enumerating every window; the first maximum in raster order wins.
pub fn maxpool(x: &[f64], xd: Dims, k: usize, stride: usize, pad: usize) -> (Vec<f64>, Vec<usize>, Dims) {
    let oh = (xd[2] + 2 * pad - k) / stride + 1;
    let ow = (xd[3] + 2 * pad - k) / stride + 1;
    let od = [xd[0], xd[1], oh, ow];
    let mut vals = Vec::new();
    let mut ids = Vec::new();
    for n in 0..xd[0] {
        for c in 0..xd[1] {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut window = Vec::new();
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && iy < xd[2] as isize && ix < xd[3] as isize {
                                let flat = iy as usize * xd[3] + ix as usize;
                                window.push((x[idx(xd, n, c, iy as usize, ix as usize)], flat));
                            }
                        }
                    }
                    window.sort_by_key(|&(_, f)| f);
                    let best = window
                        .iter()
                        .fold(None::<(f64, usize)>, |acc, &(v, f)| match acc {
                            Some((bv, _)) if bv >= v => acc,
                            _ => Some((v, f)),
                        })
                        .unwrap();
                    vals.push(best.0);
                    ids.push(best.1);
                }
            }
        }
    }
    (vals, ids, od)
}

/// Adaptive average pool with explicitly enumerated windows.
pub fn adaptive_avgpool(x: &[f64], xd: Dims, oh: usize, ow: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for n in 0..xd[0] {
        for c in 0..xd[1] {
            for oy in 0..oh {
                let y0 = (oy * xd[2]) / oh;
                let y1 = ((oy + 1) * xd[2] + oh - 1) / oh;
                for ox in 0..ow {
                    let x0 = (ox * xd[3]) / ow;
                    let x1 = ((ox + 1) * xd[3] + ow - 1) / ow;
                    let cells: Vec<f64> = (y0..y1)
                        .flat_map(|y| (x0..x1).map(move |xx| (y, xx)))
                        .map(|(y, xx)| x[idx(xd, n, c, y, xx)])
                        .collect();
                    out.push(cells.iter().sum::<f64>() / cells.len() as f64);
                }
            }
        }
    }
    out
}

/// Bilinear resize (align-corners=false) from per-pixel corner weights.
pub fn bilinear(x: &[f64], xd: Dims, oh: usize, ow: usize) -> Vec<f64> {
    let coord = |d: usize, inp: usize, out: usize| -> (usize, usize, f64) {
        let mut s = (d as f64 + 0.5) * inp as f64 / out as f64 - 0.5;
        if s < 0.0 {
            s = 0.0;
        }
        let i0 = (s.floor() as usize).min(inp - 1);
        let i1 = if i0 + 1 < inp { i0 + 1 } else { inp - 1 };
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::new();
    for n in 0..xd[0] {
        for c in 0..xd[1] {
            for oy in 0..oh {
                let (y0, y1, ly) = coord(oy, xd[2], oh);
                for ox in 0..ow {
                    let (x0, x1, lx) = coord(ox, xd[3], ow);
                    let v = (1.0 - ly) * (1.0 - lx) * x[idx(xd, n, c, y0, x0)]
                        + (1.0 - ly) * lx * x[idx(xd, n, c, y0, x1)]
                        + ly * (1.0 - lx) * x[idx(xd, n, c, y1, x0)]
                        + ly * lx * x[idx(xd, n, c, y1, x1)];
                    out.push(v);
                }
            }
        }
    }
    out
}

/// 2-D sampled Gaussian `exp(-(dx²+dy²)/2σ²)` over radius `ceil(3σ)`, normalised.
pub fn gaussian_kernel2d(sigma: f64) -> (Vec<f64>, usize) {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            k.push((-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = k.iter().sum();
    (k.into_iter().map(|v| v / s).collect(), r as usize)
}

// ---------------------------------------------------------------------------
// Morphology

fn disk(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dy * dy + dx * dx <= r * r {
                v.push((dy, dx));
            }
        }
    }
    v
}

/// Erosion by a discrete disk; out-of-image neighbours are ignored.
pub fn erode(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let d = disk(r);
    (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            d.iter().all(|&(dy, dx)| {
                let (yy, xx) = (y + dy, x + dx);
                yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize || mask[yy as usize * w + xx as usize]
            })
        })
        .collect()
}

/// Dilation by a discrete disk.
pub fn dilate(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let d = disk(r);
    (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            d.iter().any(|&(dy, dx)| {
                let (yy, xx) = (y + dy, x + dx);
                yy >= 0 && xx >= 0 && yy < h as isize && xx < w as isize && mask[yy as usize * w + xx as usize]
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Metrics

pub fn sad(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]).abs();
    }
    s / 1000.0
}

pub fn mse(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]) * (p[i] - g[i]);
    }
    s / p.len() as f64
}

pub fn mad(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]).abs();
    }
    s / p.len() as f64
}

/// Gradient error with a full 2-D Gaussian-derivative kernel applied by direct
/// convolution with replicated borders.
pub fn gradient_error(p: &[f64], g: &[f64], h: usize, w: usize, sigma: f64) -> f64 {
    let eps = 1e-2;
    let half = (sigma * (-2.0 * ((2.0 * std::f64::consts::PI).sqrt() * sigma * eps).ln()).sqrt()).ceil() as isize;
    let gauss = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let dgauss = |x: f64| -x * gauss(x) / (sigma * sigma);
    let size = (2 * half + 1) as usize;
    let mut hx = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let u0 = i as f64 - half as f64;
            let u1 = j as f64 - half as f64;
            hx[i * size + j] = gauss(u0) * dgauss(u1);
        }
    }
    let norm = hx.iter().map(|v| v * v).sum::<f64>().sqrt();
    hx.iter_mut().for_each(|v| *v /= norm);
    let magnitude = |img: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let (mut gx, mut gy) = (0.0, 0.0);
                for i in 0..size {
                    for j in 0..size {
                        // convolution: flip the kernel
                        let yy = (y as isize - (i as isize - half)).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize - (j as isize - half)).clamp(0, w as isize - 1) as usize;
                        gx += hx[i * size + j] * img[yy * w + xx];
                        gy += hx[j * size + i] * img[yy * w + xx];
                    }
                }
                out[y * w + x] = (gx * gx + gy * gy).sqrt();
            }
        }
        out
    };
    let (mp, mg) = (magnitude(p), magnitude(g));
    let mut s = 0.0;
    for i in 0..h * w {
        s += (mp[i] - mg[i]).powi(2);
    }
    s / 1000.0
}

/// Largest 4-connected component found by BFS flood fill. Ties go to the
/// component whose first pixel comes first in raster order.
pub fn largest_component(mask: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut seen = vec![false; h * w];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..h * w {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = q.pop_front() {
            comp.push(i);
            let (y, x) = (i / w, i % w);
            let mut nb = Vec::new();
            if y > 0 {
                nb.push(i - w);
            }
            if y + 1 < h {
                nb.push(i + w);
            }
            if x > 0 {
                nb.push(i - 1);
            }
            if x + 1 < w {
                nb.push(i + 1);
            }
            for j in nb {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut out = vec![false; h * w];
    for i in best {
        out[i] = true;
    }
    out
}

pub fn connectivity_error(p: &[f64], g: &[f64], h: usize, w: usize, theta: f64, step: f64) -> f64 {
    let steps = (1.0 / step).round() as usize;
    let mut l = vec![-1.0f64; h * w];
    for i in 1..=steps {
        let t = i as f64 * step;
        let both: Vec<bool> = (0..h * w).map(|k| p[k] >= t && g[k] >= t).collect();
        let omega = largest_component(&both, h, w);
        for k in 0..h * w {
            if l[k] == -1.0 && !omega[k] {
                l[k] = (i - 1) as f64 * step;
            }
        }
    }
    let mut s = 0.0;
    for k in 0..h * w {
        let lk = if l[k] == -1.0 { 1.0 } else { l[k] };
        let dp = p[k] - lk;
        let dg = g[k] - lk;
        let phi_p = if dp >= theta { 1.0 - dp } else { 1.0 };
        let phi_g = if dg >= theta { 1.0 - dg } else { 1.0 };
        s += (phi_p - phi_g).abs();
    }
    s / 1000.0
}

// ---------------------------------------------------------------------------
// Losses

/// Laplacian pyramid of a single plane: `levels-1` band-pass images followed
/// by the low-pass residual. 5-tap binomial blur with replicated borders,
/// 2x2 average pooling between levels (odd trailing rows/cols dropped).
pub fn laplacian_pyramid(x: &[f64], h: usize, w: usize, levels: usize) -> Vec<(Vec<f64>, usize, usize)> {
    let k = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let blur = |img: &[f64], h: usize, w: usize| -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for a in 0..5 {
                    for b in 0..5 {
                        let yy = (y as isize + a as isize - 2).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize + b as isize - 2).clamp(0, w as isize - 1) as usize;
                        acc += k[a] * k[b] * img[yy * w + xx];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    let mut pyr = Vec::new();
    let (mut cur, mut ch, mut cw) = (x.to_vec(), h, w);
    for _ in 0..levels - 1 {
        let b = blur(&cur, ch, cw);
        pyr.push((cur.iter().zip(&b).map(|(a, c)| a - c).collect(), ch, cw));
        let (nh, nw) = (ch / 2, cw / 2);
        let mut next = vec![0.0; nh * nw];
        for y in 0..nh {
            for x in 0..nw {
                next[y * nw + x] = (b[2 * y * cw + 2 * x]
                    + b[2 * y * cw + 2 * x + 1]
                    + b[(2 * y + 1) * cw + 2 * x]
                    + b[(2 * y + 1) * cw + 2 * x + 1])
                    / 4.0;
            }
        }
        cur = next;
        ch = nh;
        cw = nw;
    }
    pyr.push((cur, ch, cw));
    pyr
}

/// `Σ 2^(i-1) · mean|Lap_i(p) - Lap_i(g)|`.
pub fn laplacian_loss(p: &[f64], g: &[f64], h: usize, w: usize, levels: usize) -> f64 {
    let a = laplacian_pyramid(p, h, w, levels);
    let b = laplacian_pyramid(g, h, w, levels);
    a.iter()
        .zip(&b)
        .enumerate()
        .map(|(i, ((la, _, _), (lb, _, _)))| {
            let l1 = la.iter().zip(lb).map(|(x, y)| (x - y).abs()).sum::<f64>() / la.len() as f64;
            2f64.powi(i as i32) * l1
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central differences of `f` at `x` with step `h`, one coordinate at a time.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}
