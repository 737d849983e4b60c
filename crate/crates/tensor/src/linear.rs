use crate::{Result, Tensor, TensorError};

/// `w · x + b` with `w` stored as `[out, in, 1, 1]`.
pub fn linear(x: &[f32], w: &Tensor, b: &[f32]) -> Result<Vec<f32>> {
    let s = w.shape();
    if s.h != 1 || s.w != 1 || s.c != x.len() || s.n != b.len() {
        return Err(TensorError::invalid(
            "linear",
            format!(
                "weight {} does not conform to input {} / bias {}",
                s,
                x.len(),
                b.len()
            ),
        ));
    }
    Ok(w.data()
        .chunks_exact(s.c)
        .zip(b)
        .map(|(row, &bias)| row.iter().zip(x).fold(bias, |acc, (&a, &v)| acc + a * v))
        .collect())
}
