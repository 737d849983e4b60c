use crate::{Result, Tensor, TensorError};

/// Maps a possibly out-of-range coordinate onto `0..len` by half-sample
/// symmetric reflection (`cba|abcd|dcb`), repeating as often as needed.
pub fn reflect_index(i: isize, len: usize) -> usize {
    let len = len as isize;
    let period = 2 * len;
    let m = i.rem_euclid(period);
    (if m < len { m } else { period - 1 - m }) as usize
}

/// Sampled Gaussian of radius `ceil(3*sigma)`, normalised to sum to one.
pub fn gaussian_kernel1d(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / sum) as f32).collect()
}

/// Separable Gaussian blur of every plane (rows first, then columns) with
/// symmetric reflect padding.
pub fn gaussian_blur2d(x: &Tensor, sigma: f64) -> Result<Tensor> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(TensorError::invalid("gaussian_blur2d", "sigma must be > 0"));
    }
    let kernel = gaussian_kernel1d(sigma);
    let radius = (kernel.len() / 2) as isize;
    let s = x.shape();
    let mut out = x.clone();
    let mut tmp = vec![0.0f32; s.plane()];
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            for y in 0..s.h {
                let row = &src[y * s.w..(y + 1) * s.w];
                for xx in 0..s.w {
                    let mut acc = 0.0f32;
                    for (k, &wk) in kernel.iter().enumerate() {
                        let i = reflect_index(xx as isize + k as isize - radius, s.w);
                        acc += wk * row[i];
                    }
                    tmp[y * s.w + xx] = acc;
                }
            }
            let dst = out.plane_mut(n, c);
            for y in 0..s.h {
                for xx in 0..s.w {
                    let mut acc = 0.0f32;
                    for (k, &wk) in kernel.iter().enumerate() {
                        let i = reflect_index(y as isize + k as isize - radius, s.h);
                        acc += wk * tmp[i * s.w + xx];
                    }
                    dst[y * s.w + xx] = acc;
                }
            }
        }
    }
    Ok(out)
}
