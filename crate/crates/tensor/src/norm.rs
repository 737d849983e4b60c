use crate::{Result, Tensor, TensorError};

/// Inference-mode batch normalisation parameters for `c` channels.
#[derive(Debug, Clone, Copy)]
pub struct BatchNorm<'a> {
    pub mean: &'a [f32],
    pub var: &'a [f32],
    pub gamma: &'a [f32],
    pub beta: &'a [f32],
    pub eps: f32,
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta`, per channel.
pub fn batchnorm_infer(x: &Tensor, bn: BatchNorm<'_>) -> Result<Tensor> {
    let s = x.shape();
    for (name, v) in [("mean", bn.mean), ("var", bn.var), ("gamma", bn.gamma), ("beta", bn.beta)] {
        if v.len() != s.c {
            return Err(TensorError::invalid(
                "batchnorm_infer",
                format!("{name} has {} entries for {} channels", v.len(), s.c),
            ));
        }
    }
    if bn.var.iter().any(|&v| v < 0.0) {
        return Err(TensorError::invalid("batchnorm_infer", "negative variance"));
    }
    let mut out = x.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let scale = bn.gamma[c] / (bn.var[c] + bn.eps).sqrt();
            let shift = bn.beta[c] - bn.mean[c] * scale;
            out.plane_mut(n, c).iter_mut().for_each(|v| *v = *v * scale + shift);
        }
    }
    Ok(out)
}
