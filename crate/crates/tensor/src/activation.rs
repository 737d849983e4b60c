use crate::{Result, Shape, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Softmax across the channel axis, independently per pixel.
    SoftmaxChannel,
}

#[inline]
pub fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

pub fn activation(x: &Tensor, kind: Activation) -> Result<Tensor> {
    match kind {
        Activation::Relu => Ok(x.map(|v| v.max(0.0))),
        Activation::Sigmoid => Ok(x.map(sigmoid_scalar)),
        Activation::SoftmaxChannel => softmax_channel(x),
    }
}

fn softmax_channel(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if s.c < 2 {
        return Err(TensorError::invalid("softmax_channel", "needs at least two channels"));
    }
    let p = s.plane();
    let mut out = x.clone();
    let data = out.data_mut();
    let mut scratch = vec![0.0f32; s.c];
    for n in 0..s.n {
        let base = n * s.c * p;
        for i in 0..p {
            let mut max = f32::NEG_INFINITY;
            for c in 0..s.c {
                max = max.max(data[base + c * p + i]);
            }
            let mut sum = 0.0f32;
            for (c, e) in scratch.iter_mut().enumerate() {
                *e = (data[base + c * p + i] - max).exp();
                sum += *e;
            }
            for (c, e) in scratch.iter().enumerate() {
                data[base + c * p + i] = e / sum;
            }
        }
    }
    Ok(out)
}

/// Per-pixel max and mean over channels, stacked as a `[n, 2, h, w]` tensor
/// (max first). Means are accumulated in channel order.
pub fn channel_max_mean(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    let p = s.plane();
    let mut out = Tensor::zeros(Shape::new(s.n, 2, s.h, s.w))?;
    for n in 0..s.n {
        let mut max = vec![f32::NEG_INFINITY; p];
        let mut sum = vec![0.0f32; p];
        for c in 0..s.c {
            for ((m, a), &v) in max.iter_mut().zip(sum.iter_mut()).zip(x.plane(n, c)) {
                *m = m.max(v);
                *a += v;
            }
        }
        out.plane_mut(n, 0).copy_from_slice(&max);
        let inv = 1.0 / s.c as f32;
        for (d, a) in out.plane_mut(n, 1).iter_mut().zip(&sum) {
            *d = a * inv;
        }
    }
    Ok(out)
}
