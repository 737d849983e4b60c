//! Two-scale inference.
//!
//! The image is resized to two scales (sides rounded to the nearest multiple
//! of 32). Semantics come from the coarser run and the raw matte from the
//! finer one. Class probabilities and the raw matte are resized bilinearly
//! back to the input size; the probabilities are decoded there, so the
//! unified map stays in `{0, 0.5, 1}` before fusion.

use unimatte_tensor::{resize_bilinear, Tensor};

use super::{decode_unified, Network, NetworkOutputs, SIZE_MULTIPLE};
use crate::losses::fuse;
use crate::{AlphaMatte, Error, Plane, Result};

pub const DEFAULT_SCALES: (f64, f64) = (1.0 / 3.0, 1.0 / 4.0);

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutput {
    pub alpha: AlphaMatte,
    pub unified: Plane,
    pub matting: Plane,
    pub attention: Plane,
}

/// `round(size · scale / 32) · 32`, or an error below 32.
pub fn scaled_size(size: usize, scale: f64) -> Result<usize> {
    let s = (size as f64 * scale / SIZE_MULTIPLE as f64).round() as usize * SIZE_MULTIPLE;
    if s < SIZE_MULTIPLE {
        return Err(Error::ImageTooSmall(format!(
            "side {size} at scale {scale} rounds below {SIZE_MULTIPLE}"
        )));
    }
    Ok(s)
}

fn run_at(net: &Network, image: &Tensor, scale: f64) -> Result<NetworkOutputs> {
    let s = image.shape();
    let (h, w) = (scaled_size(s.h, scale)?, scaled_size(s.w, scale)?);
    net.forward(&resize_bilinear(image, h, w)?)
}

/// Runs `net` on a `[1, 3, H, W]` image at the two `scales` and fuses the
/// results at the original resolution.
pub fn hybrid_inference(net: &Network, image: &Tensor, scales: (f64, f64)) -> Result<HybridOutput> {
    let s = image.shape();
    if s.n != 1 {
        return Err(Error::InvalidValue(format!("hybrid inference takes one image, got {}", s.n)));
    }
    for v in [scales.0, scales.1] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidValue(format!("scale {v} not in (0, 1]")));
        }
    }
    let (fine, coarse) = if scales.0 >= scales.1 {
        (scales.0, scales.1)
    } else {
        (scales.1, scales.0)
    };
    let same_size = scaled_size(s.h, fine)? == scaled_size(s.h, coarse)?
        && scaled_size(s.w, fine)? == scaled_size(s.w, coarse)?;
    let coarse_out = run_at(net, image, coarse)?;
    let fine_out = if same_size {
        None
    } else {
        Some(run_at(net, image, fine)?)
    };
    let fine_ref = fine_out.as_ref().unwrap_or(&coarse_out);

    let probs = resize_bilinear(&coarse_out.semantic_probs, s.h, s.w)?;
    let unified = Plane::from_tensor(&decode_unified(&probs)?, 0, 0);
    let matting = Plane::from_tensor(&resize_bilinear(&fine_ref.matting_raw, s.h, s.w)?, 0, 0)
        .map(|v| v.clamp(0.0, 1.0));
    let attention = Plane::from_tensor(&resize_bilinear(&fine_ref.spatial_attention, s.h, s.w)?, 0, 0)
        .map(|v| v.clamp(0.0, 1.0));
    let alpha = fuse(&unified, &matting)?;
    Ok(HybridOutput {
        alpha,
        unified,
        matting,
        attention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_multiples() {
        assert_eq!(scaled_size(960, 1.0 / 3.0).unwrap(), 320);
        assert_eq!(scaled_size(1000, 0.25).unwrap(), 256);
        assert!(scaled_size(100, 0.1).is_err());
    }
}
