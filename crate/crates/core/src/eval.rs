//! Top-1 accuracy evaluation per phoneme type, plus the eval CSV format
//! consumed by the report command.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::model::{HeadSelector, ModelParameters, SkeletonGraph, TapedModel};
use crate::numerics::{Scalar, Tape};
use crate::taxonomy::{build_taxonomy, TYPE_COUNT};
use crate::training::batch_input;

/// Correct/total counts for one classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl TypeAccuracy {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

/// Argmax with the deterministic tie-break: the lowest class index wins.
/// Returns a 1-based class.
pub fn argmax_class<E: Scalar>(row: &[E]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best as u32 + 1
}

const EVAL_BATCH: usize = 64;

/// Top-1 accuracy of selected phoneme heads over an example list.
pub fn evaluate_types<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    examples: &[&LabeledExample],
    types: &[usize],
) -> Result<BTreeMap<usize, TypeAccuracy>> {
    if examples.is_empty() {
        return Err(Error::Usage("evaluate needs at least one example".into()));
    }
    for &t in types {
        if t < 1 || t > TYPE_COUNT {
            return Err(Error::Range(format!(
                "phoneme type id {t} outside [1, {TYPE_COUNT}]"
            )));
        }
    }
    let mut counts: BTreeMap<usize, TypeAccuracy> = types
        .iter()
        .map(|&t| (t, TypeAccuracy { correct: 0, total: 0 }))
        .collect();
    for chunk in examples.chunks(EVAL_BATCH) {
        let mut tape = Tape::<E>::new(false);
        let model = TapedModel::insert(&mut tape, params, graph)?;
        let x = batch_input(&mut tape, chunk)?;
        let embedding = model.encode(&mut tape, x)?;
        for &type_id in types {
            let probs = model.classify(&mut tape, embedding, HeadSelector::Phoneme(type_id))?;
            let k = *tape.shape(probs).last().unwrap();
            let acc = counts.get_mut(&type_id).unwrap();
            for (row, ex) in tape.values(probs).chunks(k).zip(chunk) {
                acc.total += 1;
                if argmax_class(row) == ex.phonemes[type_id - 1] {
                    acc.correct += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Top-1 accuracy of every phoneme head.
pub fn evaluate<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    examples: &[&LabeledExample],
) -> Result<BTreeMap<usize, TypeAccuracy>> {
    let all: Vec<usize> = (1..=TYPE_COUNT).collect();
    evaluate_types(params, graph, examples, &all)
}

/// Top-1 gloss accuracy.
pub fn evaluate_gloss<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    examples: &[&LabeledExample],
) -> Result<TypeAccuracy> {
    if examples.is_empty() {
        return Err(Error::Usage("evaluate needs at least one example".into()));
    }
    let mut acc = TypeAccuracy { correct: 0, total: 0 };
    for chunk in examples.chunks(EVAL_BATCH) {
        let mut tape = Tape::<E>::new(false);
        let model = TapedModel::insert(&mut tape, params, graph)?;
        let x = batch_input(&mut tape, chunk)?;
        let embedding = model.encode(&mut tape, x)?;
        let probs = model.classify(&mut tape, embedding, HeadSelector::Gloss)?;
        let k = *tape.shape(probs).last().unwrap();
        for (row, ex) in tape.values(probs).chunks(k).zip(chunk) {
            acc.total += 1;
            if argmax_class(row) == ex.gloss {
                acc.correct += 1;
            }
        }
    }
    Ok(acc)
}

/// Majority-class baseline: the most frequent class per type on the
/// training examples (ties to the lowest index), scored on the test
/// examples.
pub fn majority_baseline(
    train: &[&LabeledExample],
    test: &[&LabeledExample],
) -> BTreeMap<usize, TypeAccuracy> {
    let taxonomy = build_taxonomy();
    let mut out = BTreeMap::new();
    for ty in taxonomy.types() {
        let mut counts = vec![0usize; ty.cardinality as usize];
        for ex in train {
            counts[ex.phonemes[ty.id - 1] as usize - 1] += 1;
        }
        let majority = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i as u32 + 1)
            .unwrap_or(1);
        let correct = test
            .iter()
            .filter(|ex| ex.phonemes[ty.id - 1] == majority)
            .count();
        out.insert(
            ty.id,
            TypeAccuracy {
                correct,
                total: test.len(),
            },
        );
    }
    out
}

/// Write the eval CSV: `type_id,type_name,correct,total,accuracy` with
/// accuracy in percent at full precision.
pub fn write_eval_csv(path: &Path, accuracies: &BTreeMap<usize, TypeAccuracy>) -> Result<()> {
    let taxonomy = build_taxonomy();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(["type_id", "type_name", "correct", "total", "accuracy"])
        .map_err(|e| Error::format(path, e.to_string()))?;
    for (type_id, acc) in accuracies {
        let name = &taxonomy.get(*type_id)?.name;
        writer
            .write_record([
                type_id.to_string(),
                name.clone(),
                acc.correct.to_string(),
                acc.total.to_string(),
                acc.percent().to_string(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read an eval CSV back into per-type percentages.
pub fn read_eval_csv(path: &Path) -> Result<BTreeMap<usize, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != 5 {
            return Err(Error::format(path, format!("{} fields, expected 5", record.len())));
        }
        let type_id: usize = record[0]
            .parse()
            .map_err(|_| Error::format(path, format!("bad type_id '{}'", &record[0])))?;
        let accuracy: f64 = record[4]
            .parse()
            .map_err(|_| Error::format(path, format!("bad accuracy '{}'", &record[4])))?;
        out.insert(type_id, accuracy);
    }
    Ok(out)
}
