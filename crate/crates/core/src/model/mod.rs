//! The pose-sequence encoder and classification heads: a simplified
//! spatial-temporal graph convolution over a fixed skeleton, mean-pooled
//! into an embedding that sixteen phoneme heads (plus one gloss head) map
//! to class distributions.

mod checkpoint;
mod encoder;
mod params;
mod skeleton;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use encoder::{HeadSelector, TapedModel};
pub use params::{EncoderConfig, ModelParameters, INPUT_CHANNELS};
pub use skeleton::{build_graph, joint, SkeletonGraph, UPPER_BODY_27};
