//! Dense-tensor arithmetic with reverse-mode gradient propagation: the
//! minimal substrate for the encoder, heads, losses, and optimizer.
//!
//! Training runs in 32-bit; gradient verification instantiates the same
//! code at 64-bit. Everything is deterministic: identical inputs produce
//! bit-identical outputs, with or without the row-parallel kernels (each
//! output element is always reduced in the same order by a single thread).

mod adam;
mod kernels;
mod tape;

pub use adam::{Adam, AdamConfig, ParamTensor};
pub use tape::{softmax_values, NodeId, Tape};

use std::sync::atomic::{AtomicBool, Ordering};

/// Element type for tensors: `f32` for training, `f64` for verification.
pub trait Scalar:
    num_traits::Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Debug
    + std::fmt::Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    const DTYPE: &'static str;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn from_f64(x: f64) -> f32 {
        x as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn from_f64(x: f64) -> f64 {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }
}

static PARALLEL: AtomicBool = AtomicBool::new(false);

/// Enable or disable row-parallel kernels. Off is the reference mode;
/// results are bit-identical either way.
pub fn set_parallelism(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallelism() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}
