//! Training library for sign-language phoneme-type classifiers: a skeleton
//! graph convolution encoder with sixteen phoneme heads and a gloss head,
//! trained by per-type fine-tuning, multi-task learning, or a cumulative
//! curriculum, over synthetic or ingested pose corpora.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod report;
pub mod taxonomy;
pub mod training;

pub use error::{Error, Result};
