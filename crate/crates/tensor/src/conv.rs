//! 2-D cross-correlation via im2col + sgemm.
//!
//! Reduction order: every output element is a single dot product over the
//! flattened `(in_channel, ky, kx)` axis, evaluated by one sgemm call over a
//! column tile. Tiles are fixed-width chunks of the flattened output plane
//! (`COL_TILE` positions, independent of thread count), so running tiles in
//! parallel cannot change any result bit.

use rayon::prelude::*;

use crate::{Result, Shape, Tensor, TensorError};

const COL_TILE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Default for ConvParams {
    fn default() -> Self {
        ConvParams {
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }
}

impl ConvParams {
    pub fn same(kernel: usize) -> Self {
        ConvParams {
            stride: 1,
            padding: kernel / 2,
            dilation: 1,
        }
    }
}

/// `floor((size + 2*padding - dilation*(kernel-1) - 1) / stride) + 1`, or
/// `None` when the result would be below one.
pub fn conv_output_size(size: usize, kernel: usize, p: ConvParams) -> Option<usize> {
    let span = p.dilation * (kernel - 1) + 1;
    let padded = size + 2 * p.padding;
    if padded < span {
        return None;
    }
    Some((padded - span) / p.stride + 1)
}

/// Cross-correlates `x` (`[n, in_c, h, w]`) with `weight` (`[out_c, in_c, kh, kw]`).
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: Option<&[f32]>, p: ConvParams) -> Result<Tensor> {
    let xs = x.shape();
    let ws = weight.shape();
    if ws.c != xs.c {
        return Err(TensorError::ChannelMismatch {
            op: "conv2d",
            expected: ws.c,
            actual: xs.c,
        });
    }
    if p.stride == 0 || p.dilation == 0 {
        return Err(TensorError::invalid("conv2d", "stride and dilation must be >= 1"));
    }
    if let Some(b) = bias {
        if b.len() != ws.n {
            return Err(TensorError::invalid(
                "conv2d",
                format!("bias has {} entries for {} output channels", b.len(), ws.n),
            ));
        }
    }
    let (oh, ow) = match (conv_output_size(xs.h, ws.h, p), conv_output_size(xs.w, ws.w, p)) {
        (Some(h), Some(w)) => (h, w),
        _ => return Err(TensorError::EmptyOutput { op: "conv2d" }),
    };

    let out_shape = Shape::new(xs.n, ws.n, oh, ow);
    let positions = oh * ow;
    let k = ws.c * ws.h * ws.w;
    let mut out = vec![0.0f32; out_shape.numel()];
    let pointwise = ws.h == 1 && ws.w == 1 && p.stride == 1 && p.padding == 0;

    for n in 0..xs.n {
        let input = &x.data()[n * xs.c * xs.plane()..(n + 1) * xs.c * xs.plane()];
        let tiles: Vec<usize> = (0..positions).step_by(COL_TILE).collect();
        let results: Vec<Vec<f32>> = tiles
            .par_iter()
            .map(|&start| {
                let width = COL_TILE.min(positions - start);
                let mut tile = vec![0.0f32; ws.n * width];
                if pointwise {
                    // The input planes already are the column matrix.
                    unsafe {
                        matrixmultiply::sgemm(
                            ws.n,
                            k,
                            width,
                            1.0,
                            weight.data().as_ptr(),
                            k as isize,
                            1,
                            input.as_ptr().add(start),
                            xs.plane() as isize,
                            1,
                            0.0,
                            tile.as_mut_ptr(),
                            width as isize,
                            1,
                        );
                    }
                } else {
                    let cols = im2col(input, xs, ws, p, ow, start, width);
                    unsafe {
                        matrixmultiply::sgemm(
                            ws.n,
                            k,
                            width,
                            1.0,
                            weight.data().as_ptr(),
                            k as isize,
                            1,
                            cols.as_ptr(),
                            width as isize,
                            1,
                            0.0,
                            tile.as_mut_ptr(),
                            width as isize,
                            1,
                        );
                    }
                }
                tile
            })
            .collect();

        let base = n * ws.n * positions;
        for (&start, tile) in tiles.iter().zip(&results) {
            let width = tile.len() / ws.n;
            for oc in 0..ws.n {
                let b = bias.map_or(0.0, |b| b[oc]);
                let dst = &mut out[base + oc * positions + start..base + oc * positions + start + width];
                for (d, &v) in dst.iter_mut().zip(&tile[oc * width..(oc + 1) * width]) {
                    *d = v + b;
                }
            }
        }
    }
    Tensor::new(out_shape, out)
}

/// Column matrix `[in_c*kh*kw, width]` for output positions `start..start+width`.
fn im2col(
    input: &[f32],
    xs: Shape,
    ws: Shape,
    p: ConvParams,
    ow: usize,
    start: usize,
    width: usize,
) -> Vec<f32> {
    let k = ws.c * ws.h * ws.w;
    let mut cols = vec![0.0f32; k * width];
    let pad = p.padding as isize;
    let mut row = 0;
    for ic in 0..xs.c {
        let plane = &input[ic * xs.plane()..(ic + 1) * xs.plane()];
        for ky in 0..ws.h {
            for kx in 0..ws.w {
                let dst = &mut cols[row * width..(row + 1) * width];
                let (mut oy, mut ox) = (start / ow, start % ow);
                for d in dst.iter_mut() {
                    let iy = (oy * p.stride + ky * p.dilation) as isize - pad;
                    let ix = (ox * p.stride + kx * p.dilation) as isize - pad;
                    if iy >= 0 && ix >= 0 && (iy as usize) < xs.h && (ix as usize) < xs.w {
                        *d = plane[iy as usize * xs.w + ix as usize];
                    }
                    ox += 1;
                    if ox == ow {
                        ox = 0;
                        oy += 1;
                    }
                }
                row += 1;
            }
        }
    }
    cols
}
