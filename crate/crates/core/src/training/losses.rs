//! Loss assembly for the three strategies. Everything funnels through one
//! batch builder: the encoding is computed once per batch and shared by
//! every active head, and the multi-task loss is literally the sum of the
//! per-type cross-entropy terms, so the curriculum at k=16 is the
//! multi-task loss bit for bit.

use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::model::{HeadSelector, ModelParameters, SkeletonGraph, TapedModel, INPUT_CHANNELS};
use crate::numerics::{NodeId, Scalar, Tape};
use crate::taxonomy::{build_taxonomy, TYPE_COUNT};

use super::schedule::active_type_count;

/// What a batch is scored against.
#[derive(Debug, Clone, Copy)]
pub enum LossTarget<'a> {
    /// 1-based phoneme type ids, in evaluation order.
    Phonemes(&'a [usize]),
    Gloss,
}

/// A built batch loss: the scalar node plus the per-term values.
pub struct BatchLoss {
    pub loss: NodeId,
    /// (type id, batch-mean cross-entropy); single entry keyed 0 for gloss.
    pub per_term: Vec<(usize, f64)>,
}

/// Record the pose batch as one `[B, T, V, 3]` leaf.
pub fn batch_input<E: Scalar>(
    tape: &mut Tape<E>,
    examples: &[&LabeledExample],
) -> Result<NodeId> {
    let first = examples.first().ok_or_else(|| {
        Error::Usage("batch must contain at least one example".into())
    })?;
    let (t, v) = (first.pose.frames, first.pose.joints);
    let mut values = Vec::with_capacity(examples.len() * t * v * INPUT_CHANNELS);
    for ex in examples {
        if ex.pose.frames != t || ex.pose.joints != v {
            return Err(Error::Dimension {
                op: "batch_input",
                left: vec![t, v],
                right: vec![ex.pose.frames, ex.pose.joints],
            });
        }
        values.extend(ex.pose.values.iter().map(|&x| E::from_f64(x)));
    }
    tape.leaf(&[examples.len(), t, v, INPUT_CHANNELS], values, false)
}

/// Build the strategy loss for a batch: encode once, then one
/// cross-entropy term per target head, summed. Terms use the batch mean,
/// so the batch loss is the per-example type-sum averaged over examples.
pub fn batch_loss<E: Scalar>(
    tape: &mut Tape<E>,
    model: &TapedModel,
    examples: &[&LabeledExample],
    target: LossTarget,
) -> Result<BatchLoss> {
    let x = batch_input(tape, examples)?;
    let embedding = model.encode(tape, x)?;
    let mut per_term = Vec::new();
    let mut total: Option<NodeId> = None;
    let mut add_term = |tape: &mut Tape<E>, key: usize, term: NodeId| -> Result<()> {
        per_term.push((key, tape.scalar(term)?.to_f64()));
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
        Ok(())
    };
    match target {
        LossTarget::Phonemes(types) => {
            if types.is_empty() {
                return Err(Error::Usage("no phoneme types selected".into()));
            }
            for &type_id in types {
                let probs = model.classify(tape, embedding, HeadSelector::Phoneme(type_id))?;
                let labels: Vec<u32> = examples
                    .iter()
                    .map(|ex| ex.phonemes[type_id - 1])
                    .collect();
                let ce = tape.cross_entropy(probs, &labels)?;
                add_term(tape, type_id, ce)?;
            }
        }
        LossTarget::Gloss => {
            let probs = model.classify(tape, embedding, HeadSelector::Gloss)?;
            let labels: Vec<u32> = examples.iter().map(|ex| ex.gloss).collect();
            let ce = tape.cross_entropy(probs, &labels)?;
            add_term(tape, 0, ce)?;
        }
    }
    Ok(BatchLoss {
        loss: total.unwrap(),
        per_term,
    })
}

fn validated<'a>(example: &'a LabeledExample) -> Result<&'a LabeledExample> {
    if let Some(v) = build_taxonomy().validate_labels(&example.phonemes) {
        return Err(Error::Validation(format!("example {}: {v}", example.id)));
    }
    Ok(example)
}

fn single_example_loss<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    example: &LabeledExample,
    types: &[usize],
) -> Result<f64> {
    let example = validated(example)?;
    let mut tape = Tape::new(false);
    let model = TapedModel::insert(&mut tape, params, graph)?;
    let built = batch_loss(&mut tape, &model, &[example], LossTarget::Phonemes(types))?;
    Ok(tape.scalar(built.loss)?.to_f64())
}

/// Per-type fine-tuning loss: the cross-entropy of one head on one
/// example.
pub fn loss_finetune<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    example: &LabeledExample,
    type_id: usize,
) -> Result<f64> {
    if type_id < 1 || type_id > TYPE_COUNT {
        return Err(Error::Range(format!(
            "phoneme type id {type_id} outside [1, {TYPE_COUNT}]"
        )));
    }
    single_example_loss(params, graph, example, &[type_id])
}

/// Multi-task loss: the sum of all sixteen per-type terms over a shared
/// encoding.
pub fn loss_multitask<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    example: &LabeledExample,
) -> Result<f64> {
    let types: Vec<usize> = (1..=TYPE_COUNT).collect();
    single_example_loss(params, graph, example, &types)
}

/// Cumulative curriculum loss at a given epoch: the first
/// `active_type_count(epoch, interval)` types in curriculum order.
pub fn loss_curriculum<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    example: &LabeledExample,
    epoch: usize,
    interval: usize,
) -> Result<f64> {
    let k = active_type_count(epoch, interval)?;
    let types: Vec<usize> = (1..=k).collect();
    single_example_loss(params, graph, example, &types)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, SynthesisSpec};
    use crate::model::{build_graph, EncoderConfig, UPPER_BODY_27};

    fn toy_setup() -> (ModelParameters<f64>, SkeletonGraph, Vec<LabeledExample>) {
        let tax = build_taxonomy();
        let config = EncoderConfig {
            blocks: 2,
            channels: vec![6, 8],
            temporal_kernel: 3,
            embedding_dim: 8,
            joints: 27,
            frames: 8,
        };
        let params = ModelParameters::init(config, &tax, 4, 23).unwrap();
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let mut spec = SynthesisSpec::desk_default(5);
        spec.examples = 6;
        spec.gloss_count = 4;
        spec.frames = 8;
        let examples = synthesize(&spec, &graph).unwrap();
        (params, graph, examples)
    }

    #[test]
    fn zeroed_heads_give_log_cardinality_losses() {
        let (mut params, graph, examples) = toy_setup();
        params.zero_phoneme_heads();
        let ex = &examples[0];
        let l1 = loss_finetune(&params, &graph, ex, 1).unwrap();
        assert!((l1 - 5f64.ln()).abs() < 1e-12, "{l1}");
        let l16 = loss_finetune(&params, &graph, ex, 16).unwrap();
        assert!((l16 - 58f64.ln()).abs() < 1e-12);

        let expected: f64 = build_taxonomy()
            .types()
            .iter()
            .map(|t| (t.cardinality as f64).ln())
            .sum();
        let mt = loss_multitask(&params, &graph, ex).unwrap();
        assert!((mt - expected).abs() < 1e-10, "{mt} vs {expected}");
        // Hand value of the same constant, for the record.
        assert!((expected - 31.015578121515787).abs() < 1e-12);

        let k2 = loss_curriculum(&params, &graph, ex, 3, 3).unwrap();
        assert!((k2 - (5f64.ln() + 37f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn multitask_is_sum_of_finetune_terms() {
        let (params, graph, examples) = toy_setup();
        for ex in &examples {
            let mt = loss_multitask(&params, &graph, ex).unwrap();
            let mut sum = 0.0;
            for type_id in 1..=16 {
                sum += loss_finetune(&params, &graph, ex, type_id).unwrap();
            }
            assert_eq!(mt, sum, "example {}", ex.id);
        }
    }

    #[test]
    fn curriculum_boundaries_match_finetune_and_multitask() {
        let (params, graph, examples) = toy_setup();
        let ex = &examples[1];
        let epoch0 = loss_curriculum(&params, &graph, ex, 0, 5).unwrap();
        let ft = loss_finetune(&params, &graph, ex, 1).unwrap();
        assert_eq!(epoch0, ft);

        let late = loss_curriculum(&params, &graph, ex, 15 * 5, 5).unwrap();
        let mt = loss_multitask(&params, &graph, ex).unwrap();
        assert_eq!(late, mt, "k=16 curriculum must equal multitask bit for bit");
    }

    #[test]
    fn finetune_composition_matches_hand_assembled_pipeline() {
        let (params, graph, examples) = toy_setup();
        let ex = &examples[2];
        let type_id = 7usize;
        let got = loss_finetune(&params, &graph, ex, type_id).unwrap();

        // Independent composition through the public primitives.
        let mut tape = Tape::<f64>::new(false);
        let model = TapedModel::insert(&mut tape, &params, &graph).unwrap();
        let x = batch_input(&mut tape, &[ex]).unwrap();
        let emb = model.encode(&mut tape, x).unwrap();
        let probs = model
            .classify(&mut tape, emb, HeadSelector::Phoneme(type_id))
            .unwrap();
        let ce = tape
            .cross_entropy(probs, &[ex.phonemes[type_id - 1]])
            .unwrap();
        let expected = tape.scalar(ce).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn invalid_labels_are_validation_errors() {
        let (params, graph, mut examples) = toy_setup();
        examples[0].phonemes[3] = 9; // Contact has 2 classes
        let err = loss_multitask(&params, &graph, &examples[0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("Contact"), "{err}");

        assert!(matches!(
            loss_finetune(&params, &graph, &examples[1], 0),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            loss_finetune(&params, &graph, &examples[1], 17),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn per_head_gradients_match_the_isolated_term() {
        // Gradient of the multitask loss w.r.t. one head equals the
        // gradient of that head's own term: the heads only interact
        // through the shared encoder.
        let (params, graph, examples) = toy_setup();
        let ex = &examples[0];
        let type_id = 4usize;

        let head_grad = |types: &[usize]| -> Vec<f64> {
            let mut tape = Tape::<f64>::new(true);
            let model = TapedModel::insert(&mut tape, &params, &graph).unwrap();
            let built =
                batch_loss(&mut tape, &model, &[ex], LossTarget::Phonemes(types)).unwrap();
            tape.backward(built.loss).unwrap();
            let mut probe = params.clone();
            model.accumulate_grads(&tape, &mut probe).unwrap();
            probe.heads[type_id - 1].weight.grad.clone().unwrap()
        };

        let all: Vec<usize> = (1..=16).collect();
        let from_multitask = head_grad(&all);
        let isolated = head_grad(&[type_id]);
        assert_eq!(from_multitask, isolated);
    }
}
