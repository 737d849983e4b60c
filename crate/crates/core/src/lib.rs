//! Automatic image matting toolkit.
//!
//! The crate is organised around the pieces of the matting system:
//!
//! * [`network`]: the encoder / semantic decoder / guided matting decoder
//!   network, its layer table, weight store and hybrid-scale inference.
//! * [`semantics`]: trimaps, the unified semantic representation
//!   (trimap / duomap / unimap) and their class encodings.
//! * [`losses`]: the fusion rule and the training losses with analytic
//!   gradients.
//! * [`metrics`]: SAD, MSE, MAD, connectivity and gradient errors plus the
//!   per-type / per-category aggregation used in benchmark reports.
//! * [`datapipe`]: compositing, augmentation and manifest handling.
//! * [`report`]: CSV / JSON / Markdown serialisation of metric reports.

pub mod datapipe;
mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod network;
mod plane;
pub mod report;
pub mod semantics;

pub use error::{Error, Result};
pub use plane::{ColorImage, Plane};
pub use semantics::{AlphaMatte, ImageType, Trimap, UnifiedRep};
pub use unimatte_tensor as tensor;
