//! Minimal dense-tensor kernel layer.
//!
//! Everything here operates on [`Tensor`], a rank-4 `f32` array in
//! batch-channel-height-width order. All operations are pure functions of
//! their inputs. Kernels that use internal parallelism split work along
//! output positions only, with a partition that depends on the shape and
//! never on the thread count, so results are bit-identical across runs and
//! pool sizes.

mod activation;
mod blur;
mod conv;
mod error;
mod linear;
mod norm;
mod pool;
mod resample;
mod rng;
mod tensor;

pub use activation::{activation, channel_max_mean, sigmoid_scalar, Activation};
pub use blur::{gaussian_blur2d, gaussian_kernel1d, reflect_index};
pub use conv::{conv2d, conv_output_size, ConvParams};
pub use error::TensorError;
pub use linear::linear;
pub use norm::{batchnorm_infer, BatchNorm};
pub use pool::{adaptive_avgpool, max_unpool2d, maxpool2d_indexed, PoolIndices};
pub use resample::{resize_bilinear, upsample2x, UpsampleMode};
pub use rng::SplitMix64;
pub use tensor::{concat_channels, Shape, Tensor};

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
