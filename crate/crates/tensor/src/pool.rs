use crate::{Result, Shape, Tensor, TensorError};

/// Argmax positions recorded by [`maxpool2d_indexed`].
///
/// Each entry is a flat `y * w + x` index into the pre-pool plane of the same
/// `(n, c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    shape: Shape,
    source: (usize, usize),
    indices: Vec<u32>,
}

impl PoolIndices {
    /// Wraps raw indices. Bounds are checked when the indices are consumed.
    pub fn from_raw(shape: Shape, source: (usize, usize), indices: Vec<u32>) -> Result<Self> {
        if indices.len() != shape.numel() {
            return Err(TensorError::LengthMismatch {
                shape,
                len: indices.len(),
                expected: shape.numel(),
            });
        }
        Ok(PoolIndices {
            shape,
            source,
            indices,
        })
    }

    /// Shape of the pooled output these indices belong to.
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// `(h, w)` of the plane the indices point into.
    pub fn source_size(&self) -> (usize, usize) {
        self.source
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.indices
    }
}

/// Max pooling with `-inf` padding that also returns the argmax of every window.
///
/// Windows are scanned in raster order and only a strictly greater value
/// replaces the running max, so ties resolve to the smallest flat index.
pub fn maxpool2d_indexed(
    x: &Tensor,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, PoolIndices)> {
    if kernel == 0 || stride == 0 {
        return Err(TensorError::invalid("maxpool2d", "kernel and stride must be >= 1"));
    }
    if padding > kernel / 2 {
        return Err(TensorError::invalid(
            "maxpool2d",
            format!("padding {padding} exceeds half the kernel {kernel}"),
        ));
    }
    let s = x.shape();
    let out = |size: usize| {
        let padded = size + 2 * padding;
        (padded >= kernel).then(|| (padded - kernel) / stride + 1)
    };
    let (oh, ow) = match (out(s.h), out(s.w)) {
        (Some(h), Some(w)) => (h, w),
        _ => return Err(TensorError::EmptyOutput { op: "maxpool2d" }),
    };
    let out_shape = Shape::new(s.n, s.c, oh, ow);
    let mut values = Vec::with_capacity(out_shape.numel());
    let mut indices = Vec::with_capacity(out_shape.numel());
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            for oy in 0..oh {
                let y0 = (oy * stride) as isize - padding as isize;
                for ox in 0..ow {
                    let x0 = (ox * stride) as isize - padding as isize;
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for ky in 0..kernel as isize {
                        let iy = y0 + ky;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..kernel as isize {
                            let ix = x0 + kx;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let idx = iy as usize * s.w + ix as usize;
                            let v = plane[idx];
                            if best_idx == usize::MAX || v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    values.push(best);
                    indices.push(best_idx as u32);
                }
            }
        }
    }
    Ok((
        Tensor::new(out_shape, values)?,
        PoolIndices {
            shape: out_shape,
            source: (s.h, s.w),
            indices,
        },
    ))
}

/// Scatters pooled values back to their recorded positions; all other
/// entries are zero.
///
/// `out_size` defaults to `((h - 1) * stride + kernel, (w - 1) * stride + kernel)`
/// and must agree with the plane the indices were recorded against.
pub fn max_unpool2d(
    x: &Tensor,
    idx: &PoolIndices,
    kernel: usize,
    stride: usize,
    out_size: Option<(usize, usize)>,
) -> Result<Tensor> {
    let s = x.shape();
    if s != idx.shape {
        return Err(TensorError::ShapeMismatch {
            op: "max_unpool2d",
            left: s,
            right: idx.shape,
        });
    }
    let (oh, ow) = out_size.unwrap_or(((s.h - 1) * stride + kernel, (s.w - 1) * stride + kernel));
    if (oh, ow) != idx.source {
        return Err(TensorError::ShapeMismatch {
            op: "max_unpool2d",
            left: Shape::new(s.n, s.c, oh, ow),
            right: Shape::new(s.n, s.c, idx.source.0, idx.source.1),
        });
    }
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow))?;
    let p = s.plane();
    for n in 0..s.n {
        for c in 0..s.c {
            let base = (n * s.c + c) * p;
            let src = &x.data()[base..base + p];
            let ids = &idx.indices[base..base + p];
            let dst = out.plane_mut(n, c);
            for (&v, &i) in src.iter().zip(ids) {
                let i = i as usize;
                if i >= oh * ow {
                    return Err(TensorError::IndexOutOfBounds { index: i, h: oh, w: ow });
                }
                dst[i] = v;
            }
        }
    }
    Ok(out)
}

/// Averages contiguous windows using `start = floor(i*H/out)`,
/// `end = ceil((i+1)*H/out)`. `out` may exceed the input size, in which case
/// windows overlap.
pub fn adaptive_avgpool(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::EmptyOutput {
            op: "adaptive_avgpool",
        });
    }
    let s = x.shape();
    let bounds = |i: usize, out: usize, size: usize| (i * size / out, ((i + 1) * size).div_ceil(out));
    let out_shape = Shape::new(s.n, s.c, out_h, out_w);
    let mut data = Vec::with_capacity(out_shape.numel());
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            for oy in 0..out_h {
                let (y0, y1) = bounds(oy, out_h, s.h);
                for ox in 0..out_w {
                    let (x0, x1) = bounds(ox, out_w, s.w);
                    let mut sum = 0.0f32;
                    for y in y0..y1 {
                        for v in &plane[y * s.w + x0..y * s.w + x1] {
                            sum += v;
                        }
                    }
                    data.push(sum / ((y1 - y0) * (x1 - x0)) as f32);
                }
            }
        }
    }
    Tensor::new(out_shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_two_by_two() {
        let x = Tensor::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (v, i) = maxpool2d_indexed(&x, 2, 2, 0).unwrap();
        assert_eq!(v.data(), &[4.0]);
        assert_eq!(i.as_slice(), &[3]);
        let back = max_unpool2d(&v, &i, 2, 2, Some((2, 2))).unwrap();
        assert_eq!(back.data(), &[0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn constant_input_picks_first_of_window() {
        let x = Tensor::full([1, 1, 5, 5], 0.25).unwrap();
        let (v, i) = maxpool2d_indexed(&x, 3, 2, 1).unwrap();
        assert!(v.data().iter().all(|&a| a == 0.25));
        // Window origin (oy*2-1, ox*2-1) clipped to the plane.
        let expected: Vec<u32> = (0..3)
            .flat_map(|oy: usize| {
                (0..3).map(move |ox: usize| {
                    let y = (oy * 2).saturating_sub(1);
                    let x = (ox * 2).saturating_sub(1);
                    (y * 5 + x) as u32
                })
            })
            .collect();
        assert_eq!(i.as_slice(), expected.as_slice());
    }

    #[test]
    fn table_pool_halves_even_sizes() {
        let x = Tensor::zeros([1, 1, 320, 320]).unwrap();
        let (v, _) = maxpool2d_indexed(&x, 3, 2, 1).unwrap();
        assert_eq!(v.shape(), Shape::new(1, 1, 160, 160));
    }

    #[test]
    fn zero_values_unpool_to_zero() {
        let x = Tensor::from_fn([1, 2, 4, 4], |_, c, y, x| (c + y * x) as f32).unwrap();
        let (v, i) = maxpool2d_indexed(&x, 2, 2, 0).unwrap();
        let zeros = v.map(|_| 0.0);
        let out = max_unpool2d(&zeros, &i, 2, 2, None).unwrap();
        assert!(out.data().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn unpool_rejects_mismatched_indices() {
        let x = Tensor::zeros([1, 1, 8, 8]).unwrap();
        let (_, i) = maxpool2d_indexed(&x, 2, 2, 0).unwrap();
        let other = Tensor::zeros([1, 1, 2, 2]).unwrap();
        assert!(matches!(
            max_unpool2d(&other, &i, 2, 2, None),
            Err(TensorError::ShapeMismatch { .. })
        ));
        let bad = PoolIndices::from_raw(Shape::new(1, 1, 1, 1), (2, 2), vec![7]).unwrap();
        let one = Tensor::zeros([1, 1, 1, 1]).unwrap();
        assert!(matches!(
            max_unpool2d(&one, &bad, 2, 2, Some((2, 2))),
            Err(TensorError::IndexOutOfBounds { index: 7, .. })
        ));
    }

    #[test]
    fn global_average() {
        let x = Tensor::from_fn([1, 1, 4, 4], |_, _, y, x| (y * 4 + x + 1) as f32).unwrap();
        assert_eq!(adaptive_avgpool(&x, 1, 1).unwrap().data(), &[8.5]);
        assert_eq!(adaptive_avgpool(&x, 4, 4).unwrap(), x);
    }

    #[test]
    fn upsizing_avgpool_repeats() {
        let x = Tensor::new([1, 1, 1, 1], vec![3.0]).unwrap();
        let y = adaptive_avgpool(&x, 5, 5).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
    }
}
