//! The ASL-LEX 2.0 phoneme-type inventory: sixteen categorical dimensions,
//! each with a fixed class count, arranged in the curriculum order used by
//! the cumulative training strategy, plus the parent/child hierarchy that
//! motivates that order.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of phoneme types.
pub const TYPE_COUNT: usize = 16;

/// Class labels for one example: one 1-based class index per phoneme type,
/// in curriculum order.
pub type PhonemeLabels = [u32; TYPE_COUNT];

/// Curriculum positions of the individual types, for code that needs to
/// name one (the synthesizer, mostly).
pub mod type_id {
    pub const MAJOR_LOCATION: usize = 1;
    pub const MINOR_LOCATION: usize = 2;
    pub const SECOND_MINOR_LOCATION: usize = 3;
    pub const CONTACT: usize = 4;
    pub const THUMB_CONTACT: usize = 5;
    pub const SIGN_TYPE: usize = 6;
    pub const REPEATED_MOVEMENT: usize = 7;
    pub const PATH_MOVEMENT: usize = 8;
    pub const WRIST_TWIST: usize = 9;
    pub const SPREAD: usize = 10;
    pub const FLEXION: usize = 11;
    pub const THUMB_POSITION: usize = 12;
    pub const SELECTED_FINGERS: usize = 13;
    pub const SPREAD_CHANGE: usize = 14;
    pub const NONDOMINANT_HANDSHAPE: usize = 15;
    pub const HANDSHAPE: usize = 16;
}

/// One phoneme type: its 1-based curriculum position, display name, class
/// count, and optional hierarchy parent (another type's id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeType {
    pub id: usize,
    pub name: String,
    pub cardinality: u32,
    pub parent: Option<usize>,
}

/// The full ordered inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeTaxonomy {
    types: Vec<PhonemeType>,
    total_classes: u32,
}

/// First label violation found by [`PhonemeTaxonomy::validate_labels`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelViolation {
    pub type_id: usize,
    pub type_name: String,
    pub label: u32,
    pub cardinality: u32,
}

impl std::fmt::Display for LabelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "label {} for {} (type {}) outside [1, {}]",
            self.label, self.type_name, self.type_id, self.cardinality
        )
    }
}

const CANON: [(&str, u32, Option<usize>); TYPE_COUNT] = [
    ("Major Location", 5, None),
    ("Minor Location", 37, Some(type_id::MAJOR_LOCATION)),
    ("Second Minor Location", 37, Some(type_id::MAJOR_LOCATION)),
    ("Contact", 2, None),
    ("Thumb Contact", 3, None),
    ("Sign Type", 6, None),
    ("Repeated Movement", 2, None),
    ("Path Movement", 8, None),
    ("Wrist Twist", 2, None),
    ("Spread", 3, Some(type_id::HANDSHAPE)),
    ("Flexion", 8, Some(type_id::HANDSHAPE)),
    ("Thumb Position", 2, Some(type_id::HANDSHAPE)),
    ("Selected Fingers", 8, Some(type_id::HANDSHAPE)),
    ("Spread Change", 3, Some(type_id::HANDSHAPE)),
    ("Nondominant Handshape", 56, None),
    ("Handshape", 58, None),
];

/// Build the canonical sixteen-type taxonomy.
pub fn build_taxonomy() -> PhonemeTaxonomy {
    let types: Vec<PhonemeType> = CANON
        .iter()
        .enumerate()
        .map(|(i, &(name, cardinality, parent))| PhonemeType {
            id: i + 1,
            name: name.to_string(),
            cardinality,
            parent,
        })
        .collect();
    let total_classes = types.iter().map(|t| t.cardinality).sum();
    PhonemeTaxonomy {
        types,
        total_classes,
    }
}

impl PhonemeTaxonomy {
    /// All sixteen types in curriculum order.
    pub fn types(&self) -> &[PhonemeType] {
        &self.types
    }

    /// Sum of all class cardinalities.
    pub fn total_classes(&self) -> u32 {
        self.total_classes
    }

    /// Look up a type by its 1-based curriculum id.
    pub fn get(&self, type_id: usize) -> Result<&PhonemeType> {
        if type_id < 1 || type_id > TYPE_COUNT {
            return Err(Error::Range(format!(
                "phoneme type id {type_id} outside [1, {TYPE_COUNT}]"
            )));
        }
        Ok(&self.types[type_id - 1])
    }

    /// Class count K_i for a type.
    pub fn cardinality(&self, type_id: usize) -> Result<u32> {
        Ok(self.get(type_id)?.cardinality)
    }

    /// Look up a type by its display name.
    pub fn by_name(&self, name: &str) -> Option<&PhonemeType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// The first `k` types in curriculum order.
    pub fn curriculum_prefix(&self, k: usize) -> Result<&[PhonemeType]> {
        if k < 1 || k > TYPE_COUNT {
            return Err(Error::Range(format!(
                "curriculum prefix length {k} outside [1, {TYPE_COUNT}]"
            )));
        }
        Ok(&self.types[..k])
    }

    /// Check a label vector against the cardinalities. Returns the first
    /// violation as data, or `None` when every label is in [1, K_i].
    pub fn validate_labels(&self, labels: &PhonemeLabels) -> Option<LabelViolation> {
        for (ty, &label) in self.types.iter().zip(labels.iter()) {
            if label < 1 || label > ty.cardinality {
                return Some(LabelViolation {
                    type_id: ty.id,
                    type_name: ty.name.clone(),
                    label,
                    cardinality: ty.cardinality,
                });
            }
        }
        None
    }

    /// Canonical JSON export: an ordered array of
    /// `{id, name, cardinality, parent}`. Byte-stable across runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.types).expect("taxonomy serializes")
    }

    /// SHA-256 of the canonical JSON, hex-encoded. Checkpoints and corpus
    /// manifests embed this so mismatched inventories are caught on load.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json().as_bytes());
        hex::encode(hasher.finalize())
    }
}
