use crate::{Result, Shape, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsampleMode {
    Nearest,
    Bilinear,
}

/// Doubles both spatial dimensions.
pub fn upsample2x(x: &Tensor, mode: UpsampleMode) -> Result<Tensor> {
    let s = x.shape();
    match mode {
        UpsampleMode::Bilinear => resize_bilinear(x, 2 * s.h, 2 * s.w),
        UpsampleMode::Nearest => {
            let (oh, ow) = (2 * s.h, 2 * s.w);
            let mut data = Vec::with_capacity(s.n * s.c * oh * ow);
            for n in 0..s.n {
                for c in 0..s.c {
                    let plane = x.plane(n, c);
                    for y in 0..oh {
                        let row = &plane[(y / 2) * s.w..(y / 2 + 1) * s.w];
                        data.extend((0..ow).map(|x| row[x / 2]));
                    }
                }
            }
            Tensor::new(Shape::new(s.n, s.c, oh, ow), data)
        }
    }
}

/// Source sample positions for one axis under the align-corners=false rule:
/// `src = (dst + 0.5) * in/out - 0.5`, clamped at zero.
fn axis_weights(input: usize, output: usize) -> Vec<(usize, usize, f32)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

/// Bilinear resampling with the align-corners=false convention.
pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::EmptyOutput {
            op: "resize_bilinear",
        });
    }
    let s = x.shape();
    if (out_h, out_w) == (s.h, s.w) {
        return Ok(x.clone());
    }
    let ys = axis_weights(s.h, out_h);
    let xs = axis_weights(s.w, out_w);
    let mut data = Vec::with_capacity(s.n * s.c * out_h * out_w);
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            for &(y0, y1, ly) in &ys {
                let r0 = &plane[y0 * s.w..(y0 + 1) * s.w];
                let r1 = &plane[y1 * s.w..(y1 + 1) * s.w];
                for &(x0, x1, lx) in &xs {
                    let top = r0[x0] + lx * (r0[x1] - r0[x0]);
                    let bottom = r1[x0] + lx * (r1[x1] - r1[x0]);
                    data.push(top + ly * (bottom - top));
                }
            }
        }
    }
    Tensor::new(Shape::new(s.n, s.c, out_h, out_w), data)
}
