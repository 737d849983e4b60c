use std::fmt;

use crate::{Result, TensorError};

/// Dimensions of a rank-4 tensor in batch-channel-height-width order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    fn has_zero(&self) -> bool {
        self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

impl From<[usize; 4]> for Shape {
    fn from(d: [usize; 4]) -> Self {
        Shape::new(d[0], d[1], d[2], d[3])
    }
}

/// Dense rank-4 `f32` array, row-major NCHW.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: impl Into<Shape>, data: Vec<f32>) -> Result<Self> {
        let shape = shape.into();
        if shape.has_zero() {
            return Err(TensorError::ZeroDim(shape));
        }
        if data.len() != shape.numel() {
            return Err(TensorError::LengthMismatch {
                shape,
                len: data.len(),
                expected: shape.numel(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Shape>) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Shape>, value: f32) -> Result<Self> {
        let shape = shape.into();
        Self::new(shape, vec![value; shape.numel()])
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` in storage order.
    pub fn from_fn(
        shape: impl Into<Shape>,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(n, c, y, x)]
    }

    /// The `h*w` plane of channel `c` in batch item `n`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of batch item `n` as a single `[1, c, h, w]` tensor.
    pub fn item(&self, n: usize) -> Tensor {
        let s = self.shape;
        let len = s.c * s.plane();
        Tensor {
            shape: Shape::new(1, s.c, s.h, s.w),
            data: self.data[n * len..(n + 1) * len].to_vec(),
        }
    }

    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "zip_with",
                left: self.shape,
                right: other.shape,
            });
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Multiplies every channel by a per-(n, c) gate, broadcast over the plane.
    pub fn scale_channels(&self, gates: &[f32]) -> Result<Tensor> {
        let s = self.shape;
        if gates.len() != s.n * s.c {
            return Err(TensorError::invalid(
                "scale_channels",
                format!("expected {} gates, got {}", s.n * s.c, gates.len()),
            ));
        }
        let p = s.plane();
        let mut out = self.clone();
        for (chunk, &g) in out.data.chunks_exact_mut(p).zip(gates) {
            chunk.iter_mut().for_each(|v| *v *= g);
        }
        Ok(out)
    }

    /// Multiplies every channel by a single-channel map `[n, 1, h, w]`.
    pub fn mul_spatial(&self, map: &Tensor) -> Result<Tensor> {
        let s = self.shape;
        let m = map.shape;
        if m.n != s.n || m.c != 1 || m.h != s.h || m.w != s.w {
            return Err(TensorError::ShapeMismatch {
                op: "mul_spatial",
                left: s,
                right: m,
            });
        }
        let p = s.plane();
        let mut out = self.clone();
        for n in 0..s.n {
            let gate = map.plane(n, 0);
            for c in 0..s.c {
                let start = (n * s.c + c) * p;
                for (v, &g) in out.data[start..start + p].iter_mut().zip(gate) {
                    *v *= g;
                }
            }
        }
        Ok(out)
    }

    /// Channels `start..start+len` as a new tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape;
        if len == 0 || start + len > s.c {
            return Err(TensorError::invalid(
                "slice_channels",
                format!("range {}..{} outside {} channels", start, start + len, s.c),
            ));
        }
        let p = s.plane();
        let mut data = Vec::with_capacity(s.n * len * p);
        for n in 0..s.n {
            let from = (n * s.c + start) * p;
            data.extend_from_slice(&self.data[from..from + len * p]);
        }
        Tensor::new(Shape::new(s.n, len, s.h, s.w), data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Concatenates tensors along the channel axis, preserving order.
pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    let first = xs
        .first()
        .ok_or_else(|| TensorError::invalid("concat_channels", "no inputs"))?
        .shape;
    let mut channels = 0;
    for x in xs {
        let s = x.shape;
        if s.n != first.n || s.h != first.h || s.w != first.w {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                left: first,
                right: s,
            });
        }
        channels += s.c;
    }
    let p = first.plane();
    let mut data = Vec::with_capacity(first.n * channels * p);
    for n in 0..first.n {
        for x in xs {
            let len = x.shape.c * p;
            data.extend_from_slice(&x.data[n * len..(n + 1) * len]);
        }
    }
    Tensor::new(Shape::new(first.n, channels, first.h, first.w), data)
}
