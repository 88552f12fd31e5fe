//! Pose-sequence datasets: representation, file ingestion, deterministic
//! synthesis, and train/validation/test splitting.

mod io;
mod rng;
mod split;
mod synth;

pub use io::{load_corpus, load_dataset, load_labels_file, write_corpus, Corpus, LABELS_FILE, MANIFEST_FILE, POSE_DIR};
pub use rng::{example_rng, fnv1a64, splitmix64, spec_rng};
pub use split::{split, DatasetSplit, SplitProportions};
pub use synth::{synthesize, HandshapeChildren, SynthesisSpec};

use crate::error::{Error, Result};
use crate::taxonomy::PhonemeLabels;

/// A keypoint sequence: T frames × V joints × 3 channels (x, y,
/// confidence), coordinates in normalized image space.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: usize,
    pub joints: usize,
    pub values: Vec<f64>,
}

impl PoseSequence {
    pub fn zeros(frames: usize, joints: usize) -> Self {
        PoseSequence {
            frames,
            joints,
            values: vec![0.0; frames * joints * 3],
        }
    }

    #[inline]
    pub fn index(&self, frame: usize, joint: usize, channel: usize) -> usize {
        (frame * self.joints + joint) * 3 + channel
    }

    #[inline]
    pub fn get(&self, frame: usize, joint: usize, channel: usize) -> f64 {
        self.values[self.index(frame, joint, channel)]
    }

    #[inline]
    pub fn set(&mut self, frame: usize, joint: usize, channel: usize, value: f64) {
        let i = self.index(frame, joint, channel);
        self.values[i] = value;
    }

    /// Coordinates finite, confidences within [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.frames * self.joints * 3 {
            return Err(Error::Validation(format!(
                "pose buffer holds {} values for {}x{}x3",
                self.values.len(),
                self.frames,
                self.joints
            )));
        }
        for (i, chunk) in self.values.chunks(3).enumerate() {
            if !chunk[0].is_finite() || !chunk[1].is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite coordinate at frame {}, joint {}",
                    i / self.joints,
                    i % self.joints
                )));
            }
            if !(0.0..=1.0).contains(&chunk[2]) {
                return Err(Error::Validation(format!(
                    "confidence {} outside [0, 1] at frame {}, joint {}",
                    chunk[2],
                    i / self.joints,
                    i % self.joints
                )));
            }
        }
        Ok(())
    }

    /// Fit to exactly `target` frames: truncate, or pad with
    /// zero-confidence frames.
    pub fn fit_frames(&self, target: usize) -> PoseSequence {
        if self.frames == target {
            return self.clone();
        }
        let mut out = PoseSequence::zeros(target, self.joints);
        let copy = self.frames.min(target);
        let per_frame = self.joints * 3;
        out.values[..copy * per_frame].copy_from_slice(&self.values[..copy * per_frame]);
        out
    }
}

/// One annotated example: pose sequence, gloss label, and the sixteen
/// phoneme labels in curriculum order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub pose: PoseSequence,
    pub gloss: u32,
    pub phonemes: PhonemeLabels,
}
