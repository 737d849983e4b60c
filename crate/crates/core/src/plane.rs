use unimatte_tensor::{Shape, Tensor};

use crate::{Error, Result};

/// Single-channel `f64` image in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::InvalidValue(format!(
                "plane {h}x{w} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Plane { h, w, data })
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Result<Self> {
        Self::new(h, w, vec![value; h * w])
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Self::new(h, w, data)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.w + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn ensure_same(&self, other: &Plane, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::SizeMismatch {
                op,
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Channel `c` of batch item `n`.
    pub fn from_tensor(t: &Tensor, n: usize, c: usize) -> Plane {
        let s = t.shape();
        Plane {
            h: s.h,
            w: s.w,
            data: t.plane(n, c).iter().map(|&v| v as f64).collect(),
        }
    }

    /// As a `[1, 1, h, w]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            Shape::new(1, 1, self.h, self.w),
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("plane dims are nonzero")
    }
}

/// Three-channel `f64` image, channel-major (all R, then G, then B).
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl ColorImage {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != 3 * h * w {
            return Err(Error::InvalidValue(format!(
                "color image {h}x{w} cannot hold {} values",
                data.len()
            )));
        }
        Ok(ColorImage { h, w, data })
    }

    pub fn filled(h: usize, w: usize, rgb: [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * h * w);
        for v in rgb {
            data.extend(std::iter::repeat_n(v, h * w));
        }
        Self::new(h, w, data)
    }

    /// Builds from `f(channel, y, x)`.
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * h * w);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(h, w, data)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.h * self.w;
        &self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            Shape::new(1, 3, self.h, self.w),
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("image dims are nonzero")
    }

    /// Batch item `n` of a 3-channel tensor.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let s = t.shape();
        if s.c != 3 {
            return Err(Error::InvalidValue(format!("expected 3 channels, got {}", s.c)));
        }
        let data = (0..3)
            .flat_map(|c| t.plane(n, c).iter().map(|&v| v as f64))
            .collect();
        Self::new(s.h, s.w, data)
    }

    pub(crate) fn ensure_dims(&self, dims: (usize, usize), op: &'static str) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::SizeMismatch {
                op,
                left: self.dims(),
                right: dims,
            });
        }
        Ok(())
    }
}
