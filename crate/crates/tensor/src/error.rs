use crate::Shape;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape} ({expected} elements)")]
    LengthMismatch {
        shape: Shape,
        len: usize,
        expected: usize,
    },
    #[error("shape {0} has a zero-sized dimension")]
    ZeroDim(Shape),
    #[error("{op}: expected {expected} input channels, got {actual}")]
    ChannelMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: shape mismatch {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("{op}: output size would be empty")]
    EmptyOutput { op: &'static str },
    #[error("unpool index {index} out of bounds for a {h}x{w} plane")]
    IndexOutOfBounds { index: usize, h: usize, w: usize },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
}

impl TensorError {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }
}
