//! Corpus files.
//!
//! A corpus directory holds:
//!   - `labels.csv` — header `id,gloss,<16 type names>`, 1-based indices
//!   - `poses/<id>.json` — one pose file per example
//!   - `manifest.json` — the synthesis spec, for regenerable corpora
//!
//! Pose file layout: `{"id", "fps", "joints", "frames": [[[x,y,c]×V]×T]}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{build_taxonomy, PhonemeLabels, TYPE_COUNT};

use super::synth::SynthesisSpec;
use super::{LabeledExample, PoseSequence};

pub const LABELS_FILE: &str = "labels.csv";
pub const POSE_DIR: &str = "poses";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct PoseFile {
    id: String,
    fps: f64,
    joints: usize,
    frames: Vec<Vec<[f64; 3]>>,
}

const DEFAULT_FPS: f64 = 25.0;

fn pose_to_file(id: &str, pose: &PoseSequence) -> PoseFile {
    let frames = (0..pose.frames)
        .map(|t| {
            (0..pose.joints)
                .map(|v| [pose.get(t, v, 0), pose.get(t, v, 1), pose.get(t, v, 2)])
                .collect()
        })
        .collect();
    PoseFile {
        id: id.to_string(),
        fps: DEFAULT_FPS,
        joints: pose.joints,
        frames,
    }
}

fn pose_from_file(path: &Path, file: PoseFile) -> Result<PoseSequence> {
    let frames = file.frames.len();
    let mut pose = PoseSequence::zeros(frames, file.joints);
    for (t, frame) in file.frames.iter().enumerate() {
        if frame.len() != file.joints {
            return Err(Error::format(
                path,
                format!(
                    "frame {t} has {} joints, header declares {}",
                    frame.len(),
                    file.joints
                ),
            ));
        }
        for (v, kp) in frame.iter().enumerate() {
            pose.set(t, v, 0, kp[0]);
            pose.set(t, v, 1, kp[1]);
            pose.set(t, v, 2, kp[2]);
        }
    }
    pose.validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(pose)
}

/// Write one pose file.
pub fn write_pose_file(path: &Path, id: &str, pose: &PoseSequence) -> Result<()> {
    let json = serde_json::to_string(&pose_to_file(id, pose))
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read one pose file.
pub fn read_pose_file(path: &Path) -> Result<(String, PoseSequence)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PoseFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let id = file.id.clone();
    let pose = pose_from_file(path, file)?;
    Ok((id, pose))
}

/// One parsed labels row.
#[derive(Debug, Clone)]
pub struct LabelRow {
    pub id: String,
    pub gloss: u32,
    pub phonemes: PhonemeLabels,
    pub line: u64,
}

/// Parse a labels CSV. The header must be exactly
/// `id,gloss,<the 16 taxonomy names in curriculum order>`. Labels are
/// validated against the cardinalities; the error names the offending id,
/// type, and line number.
pub fn load_labels_file(path: &Path) -> Result<Vec<LabelRow>> {
    let taxonomy = build_taxonomy();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?;
        let expected: Vec<&str> = std::iter::once("id")
            .chain(std::iter::once("gloss"))
            .chain(taxonomy.types().iter().map(|t| t.name.as_str()))
            .collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::format(
                path,
                format!("header {got:?} does not match expected {expected:?}"),
            ));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(rows.len() as u64 + 2);
        if record.len() != 2 + TYPE_COUNT {
            return Err(Error::format(
                path,
                format!("line {line}: {} fields, expected {}", record.len(), 2 + TYPE_COUNT),
            ));
        }
        let id = record[0].to_string();
        let gloss: u32 = record[1].parse().map_err(|_| {
            Error::format(path, format!("line {line}: gloss '{}' is not an integer", &record[1]))
        })?;
        if gloss < 1 {
            return Err(Error::format(path, format!("line {line}: gloss must be >= 1")));
        }
        let mut phonemes: PhonemeLabels = [0; TYPE_COUNT];
        for (i, slot) in phonemes.iter_mut().enumerate() {
            let field = &record[2 + i];
            *slot = field.parse().map_err(|_| {
                Error::format(
                    path,
                    format!(
                        "line {line}: {} value '{field}' is not an integer",
                        taxonomy.types()[i].name
                    ),
                )
            })?;
        }
        if let Some(v) = taxonomy.validate_labels(&phonemes) {
            return Err(Error::Validation(format!(
                "{}, line {line}, id {id}: {v}",
                path.display()
            )));
        }
        rows.push(LabelRow {
            id,
            gloss,
            phonemes,
            line,
        });
    }
    Ok(rows)
}

/// Write a labels CSV for a list of examples.
pub fn write_labels_file(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    let taxonomy = build_taxonomy();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header: Vec<&str> = std::iter::once("id")
        .chain(std::iter::once("gloss"))
        .chain(taxonomy.types().iter().map(|t| t.name.as_str()))
        .collect();
    writer
        .write_record(&header)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for ex in examples {
        let mut record = vec![ex.id.clone(), ex.gloss.to_string()];
        record.extend(ex.phonemes.iter().map(|l| l.to_string()));
        writer
            .write_record(&record)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load labeled examples from a pose directory plus labels file. Every
/// example is validated against the taxonomy.
pub fn load_dataset(pose_dir: &Path, labels_file: &Path) -> Result<Vec<LabeledExample>> {
    let rows = load_labels_file(labels_file)?;
    let mut examples = Vec::with_capacity(rows.len());
    for row in rows {
        let pose_path = pose_dir.join(format!("{}.json", row.id));
        let (pose_id, pose) = read_pose_file(&pose_path)?;
        if pose_id != row.id {
            return Err(Error::format(
                &pose_path,
                format!("pose file id '{pose_id}' does not match labels id '{}'", row.id),
            ));
        }
        examples.push(LabeledExample {
            id: row.id,
            pose,
            gloss: row.gloss,
            phonemes: row.phonemes,
        });
    }
    Ok(examples)
}

/// A loaded corpus: examples plus the regeneration manifest when present.
#[derive(Debug)]
pub struct Corpus {
    pub examples: Vec<LabeledExample>,
    pub manifest: Option<SynthesisSpec>,
    pub gloss_count: usize,
}

/// Load a corpus directory (`labels.csv`, `poses/`, optional
/// `manifest.json`). The gloss vocabulary size comes from the manifest,
/// or from the maximum observed gloss for bare ingested corpora.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::io(&manifest_path, e))?;
        Some(
            serde_json::from_str::<SynthesisSpec>(&text)
                .map_err(|e| Error::format(&manifest_path, e.to_string()))?,
        )
    } else {
        None
    };
    let examples = load_dataset(&dir.join(POSE_DIR), &dir.join(LABELS_FILE))?;
    let gloss_count = match &manifest {
        Some(m) => m.gloss_count,
        None => examples.iter().map(|e| e.gloss).max().unwrap_or(0) as usize,
    };
    if let Some(bad) = examples.iter().find(|e| e.gloss as usize > gloss_count) {
        return Err(Error::Validation(format!(
            "example {} has gloss {} outside [1, {gloss_count}]",
            bad.id, bad.gloss
        )));
    }
    Ok(Corpus {
        examples,
        manifest,
        gloss_count,
    })
}

/// Write a corpus directory: manifest, labels, and one pose file per
/// example.
pub fn write_corpus(dir: &Path, spec: &SynthesisSpec, examples: &[LabeledExample]) -> Result<()> {
    let poses: PathBuf = dir.join(POSE_DIR);
    std::fs::create_dir_all(&poses).map_err(|e| Error::io(&poses, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json =
        serde_json::to_string_pretty(spec).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    write_labels_file(&dir.join(LABELS_FILE), examples)?;
    for ex in examples {
        write_pose_file(&poses.join(format!("{}.json", ex.id)), &ex.id, &ex.pose)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::synthesize;
    use crate::model::{build_graph, UPPER_BODY_27};

    fn tiny_corpus() -> (SynthesisSpec, Vec<LabeledExample>) {
        let mut spec = SynthesisSpec::desk_default(5);
        spec.examples = 8;
        spec.gloss_count = 4;
        spec.frames = 6;
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let examples = synthesize(&spec, &graph).unwrap();
        (spec, examples)
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, examples) = tiny_corpus();
        write_corpus(dir.path(), &spec, &examples).unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.gloss_count, 4);
        assert_eq!(corpus.manifest.as_ref().unwrap(), &spec);
        assert_eq!(corpus.examples.len(), examples.len());
        for (a, b) in corpus.examples.iter().zip(&examples) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.gloss, b.gloss);
            assert_eq!(a.phonemes, b.phonemes);
            assert_eq!(a.pose.values, b.pose.values, "pose {}", a.id);
        }
    }

    #[test]
    fn header_only_labels_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let labels = dir.path().join("labels.csv");
        write_labels_file(&labels, &[]).unwrap();
        let rows = load_labels_file(&labels).unwrap();
        assert!(rows.is_empty());
        let examples = load_dataset(&dir.path().join("poses"), &labels).unwrap();
        assert!(examples.is_empty());
    }

    #[test]
    fn out_of_range_handshape_is_rejected_with_type_name() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, mut examples) = tiny_corpus();
        examples[1].phonemes[15] = 59;
        // write_labels_file does not validate; ingestion must.
        write_corpus(dir.path(), &spec, &examples).unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Handshape"), "{msg}");
        assert!(msg.contains("ex00001"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, examples) = tiny_corpus();
        write_corpus(dir.path(), &spec, &examples).unwrap();
        let labels_path = dir.path().join(LABELS_FILE);
        let mut text = std::fs::read_to_string(&labels_path).unwrap();
        text = text.replace("ex00002,3,", "ex00002,notanumber,");
        std::fs::write(&labels_path, text).unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("gloss"), "{msg}");
    }

    #[test]
    fn missing_pose_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, examples) = tiny_corpus();
        write_corpus(dir.path(), &spec, &examples).unwrap();
        std::fs::remove_file(dir.path().join(POSE_DIR).join("ex00003.json")).unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let labels = dir.path().join("labels.csv");
        std::fs::write(&labels, "id,gloss,Major Location\nex1,1,1\n").unwrap();
        let err = load_labels_file(&labels).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
    }

    #[test]
    fn pose_files_are_byte_identical_across_writes() {
        let dir = tempfile::tempdir().unwrap();
        let (_, examples) = tiny_corpus();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_pose_file(&a, &examples[0].id, &examples[0].pose).unwrap();
        write_pose_file(&b, &examples[0].id, &examples[0].pose).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
