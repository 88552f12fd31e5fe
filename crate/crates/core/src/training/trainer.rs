//! The epoch loop: seed-deterministic shuffling, per-batch loss by
//! strategy, Adam steps under the cosine schedule, and per-epoch tracing.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, LabeledExample};
use crate::error::{Error, Result};
use crate::eval::{evaluate_gloss, evaluate_types};
use crate::model::{ModelParameters, SkeletonGraph, TapedModel};
use crate::numerics::{Adam, AdamConfig, Scalar, Tape};
use crate::taxonomy::TYPE_COUNT;

use super::losses::{batch_loss, LossTarget};
use super::schedule::{active_type_count, cosine_lr};
use super::{EpochRecord, Strategy, TrainingPlan, TrainingTrace};

/// Run manifest written alongside every checkpoint: the full plan, the
/// taxonomy hash, and a reference to the corpus manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan: TrainingPlan,
    pub taxonomy_hash: String,
    pub data_manifest: Option<String>,
    pub data_manifest_hash: Option<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn types_for_epoch(strategy: Strategy, epoch: usize, interval: usize) -> Result<Vec<usize>> {
    Ok(match strategy {
        Strategy::Finetune { type_id } => vec![type_id],
        Strategy::Multitask => (1..=TYPE_COUNT).collect(),
        Strategy::Curriculum => (1..=active_type_count(epoch, interval)?).collect(),
    })
}

fn check_geometry<E: Scalar>(
    params: &ModelParameters<E>,
    examples: &[LabeledExample],
) -> Result<()> {
    for ex in examples {
        if ex.pose.frames != params.config.frames || ex.pose.joints != params.config.joints {
            return Err(Error::Dimension {
                op: "train_data",
                left: vec![ex.pose.frames, ex.pose.joints],
                right: vec![params.config.frames, params.config.joints],
            });
        }
    }
    Ok(())
}

/// Pad or truncate every example to the model's frame count.
pub fn fit_examples(examples: &mut [LabeledExample], frames: usize) {
    for ex in examples.iter_mut() {
        if ex.pose.frames != frames {
            ex.pose = ex.pose.fit_frames(frames);
        }
    }
}

struct EpochStats {
    sums: [f64; TYPE_COUNT],
    counts: [usize; TYPE_COUNT],
    gloss_sum: f64,
    gloss_count: usize,
}

impl EpochStats {
    fn new() -> Self {
        EpochStats {
            sums: [0.0; TYPE_COUNT],
            counts: [0; TYPE_COUNT],
            gloss_sum: 0.0,
            gloss_count: 0,
        }
    }

    fn record(&mut self, per_term: &[(usize, f64)], batch: usize) {
        for &(key, value) in per_term {
            if key == 0 {
                self.gloss_sum += value * batch as f64;
                self.gloss_count += batch;
            } else {
                self.sums[key - 1] += value * batch as f64;
                self.counts[key - 1] += batch;
            }
        }
    }
}

fn run_epochs<E: Scalar>(
    params: &mut ModelParameters<E>,
    graph: &SkeletonGraph,
    split: &DatasetSplit,
    plan: &TrainingPlan,
    gloss_mode: bool,
) -> Result<(TrainingTrace, GlossTrace)> {
    plan.validate()?;
    check_geometry(params, &split.train)?;
    check_geometry(params, &split.validation)?;
    if gloss_mode && split.train.is_empty() {
        return Err(Error::Config("gloss pre-training needs a non-empty dataset".into()));
    }

    let mut adam = Adam::new(AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut trace = TrainingTrace::default();
    let mut gloss_trace = GlossTrace::default();

    for epoch in 0..plan.total_epochs {
        let lr = cosine_lr(epoch, plan.total_epochs, plan.lr_max, plan.lr_min)?;
        let types = if gloss_mode {
            Vec::new()
        } else {
            types_for_epoch(plan.strategy, epoch, plan.curriculum_interval)?
        };
        order.shuffle(&mut rng);
        let mut stats = EpochStats::new();

        for (batch_index, batch_ids) in order.chunks(plan.batch_size).enumerate() {
            let batch: Vec<&LabeledExample> =
                batch_ids.iter().map(|&i| &split.train[i]).collect();
            let mut tape = Tape::<E>::new(true);
            let model = TapedModel::insert(&mut tape, params, graph)?;
            let target = if gloss_mode {
                LossTarget::Gloss
            } else {
                LossTarget::Phonemes(&types)
            };
            let built = batch_loss(&mut tape, &model, &batch, target)?;
            let loss_value = tape.scalar(built.loss)?.to_f64();
            if !loss_value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss_value} at epoch {epoch}, batch {batch_index}"
                )));
            }
            tape.backward(built.loss)?;
            model.accumulate_grads(&tape, params)?;
            adam.step(&mut params.tensors_mut(), lr)?;
            stats.record(&built.per_term, batch.len());
        }

        if gloss_mode {
            let mean_loss = if stats.gloss_count > 0 {
                stats.gloss_sum / stats.gloss_count as f64
            } else {
                0.0
            };
            let val_acc = if split.validation.is_empty() {
                None
            } else {
                let refs: Vec<&LabeledExample> = split.validation.iter().collect();
                Some(evaluate_gloss(params, graph, &refs)?.percent())
            };
            gloss_trace.epochs.push(GlossEpoch {
                epoch,
                lr,
                loss: mean_loss,
                val_accuracy: val_acc,
            });
        } else {
            let mut record = EpochRecord {
                epoch,
                lr,
                active_types: types.len(),
                type_loss: [None; TYPE_COUNT],
                type_val_accuracy: [None; TYPE_COUNT],
            };
            for &t in &types {
                if stats.counts[t - 1] > 0 {
                    record.type_loss[t - 1] =
                        Some(stats.sums[t - 1] / stats.counts[t - 1] as f64);
                }
            }
            if !split.validation.is_empty() {
                let refs: Vec<&LabeledExample> = split.validation.iter().collect();
                let accs = evaluate_types(params, graph, &refs, &types)?;
                for (t, acc) in accs {
                    record.type_val_accuracy[t - 1] = Some(acc.percent());
                }
            }
            trace.epochs.push(record);
        }
    }
    Ok((trace, gloss_trace))
}

/// Train under the plan's strategy, mutating the parameters in place.
/// Returns the per-epoch trace. Seed-deterministic: identical plans and
/// initial parameters produce identical final parameters.
pub fn train<E: Scalar>(
    params: &mut ModelParameters<E>,
    graph: &SkeletonGraph,
    split: &DatasetSplit,
    plan: &TrainingPlan,
) -> Result<TrainingTrace> {
    let (trace, _) = run_epochs(params, graph, split, plan, false)?;
    Ok(trace)
}

/// Per-epoch history of a gloss pre-training run.
#[derive(Debug, Clone, Default)]
pub struct GlossTrace {
    pub epochs: Vec<GlossEpoch>,
}

#[derive(Debug, Clone)]
pub struct GlossEpoch {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_accuracy: Option<f64>,
}

impl GlossTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        writer
            .write_record(["epoch", "lr", "gloss_loss", "gloss_val_acc"])
            .map_err(|e| Error::format(path, e.to_string()))?;
        for rec in &self.epochs {
            writer
                .write_record([
                    rec.epoch.to_string(),
                    rec.lr.to_string(),
                    rec.loss.to_string(),
                    rec.val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
                ])
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Gloss pre-training: trains the encoder plus the gloss head only; the
/// phoneme heads keep their fresh initialization. The trained parameters
/// become the base model the strategies start from.
pub fn pretrain_gloss<E: Scalar>(
    params: &mut ModelParameters<E>,
    graph: &SkeletonGraph,
    split: &DatasetSplit,
    plan: &TrainingPlan,
) -> Result<GlossTrace> {
    let (_, gloss_trace) = run_epochs(params, graph, split, plan, true)?;
    Ok(gloss_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synthesize, SplitProportions, SynthesisSpec};
    use crate::model::{build_graph, EncoderConfig, UPPER_BODY_27};
    use crate::taxonomy::build_taxonomy;

    fn toy_split(n: usize) -> (SkeletonGraph, DatasetSplit) {
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let mut spec = SynthesisSpec::desk_default(9);
        spec.examples = n;
        spec.gloss_count = 5;
        spec.frames = 8;
        let examples = synthesize(&spec, &graph).unwrap();
        let s = split(
            examples,
            SplitProportions::parse("0.8,0.1,0.1").unwrap(),
            3,
        )
        .unwrap();
        (graph, s)
    }

    fn toy_params(seed: u64) -> ModelParameters<f32> {
        let config = EncoderConfig {
            blocks: 1,
            channels: vec![6],
            temporal_kernel: 3,
            embedding_dim: 6,
            joints: 27,
            frames: 8,
        };
        ModelParameters::init(config, &build_taxonomy(), 5, seed).unwrap()
    }

    fn plan(strategy: Strategy, epochs: usize) -> TrainingPlan {
        TrainingPlan {
            strategy,
            total_epochs: epochs,
            curriculum_interval: 1,
            batch_size: 8,
            lr_max: 1e-3,
            lr_min: 1e-5,
            seed: 77,
            pretrained_checkpoint: None,
        }
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let (graph, s) = toy_split(40);
        let mut params = toy_params(1);
        let before: Vec<Vec<u32>> = params
            .tensors()
            .iter()
            .map(|t| t.values.iter().map(|v| v.to_bits()).collect())
            .collect();
        let trace = train(&mut params, &graph, &s, &plan(Strategy::Multitask, 0)).unwrap();
        assert!(trace.epochs.is_empty());
        let after: Vec<Vec<u32>> = params
            .tensors()
            .iter()
            .map(|t| t.values.iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (graph, s) = toy_split(40);
        let run = || {
            let mut params = toy_params(1);
            train(&mut params, &graph, &s, &plan(Strategy::Multitask, 2)).unwrap();
            params
                .tensors()
                .iter()
                .flat_map(|t| t.values.iter().map(|v| v.to_bits()))
                .collect::<Vec<u32>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn curriculum_trace_counts_active_types() {
        let (graph, s) = toy_split(40);
        let mut params = toy_params(2);
        let mut p = plan(Strategy::Curriculum, 16);
        p.curriculum_interval = 1;
        let trace = train(&mut params, &graph, &s, &p).unwrap();
        assert_eq!(trace.epochs.len(), 16);
        assert_eq!(trace.epochs[0].active_types, 1);
        assert_eq!(trace.epochs[15].active_types, 16);
        for w in trace.epochs.windows(2) {
            assert!(w[0].active_types <= w[1].active_types);
        }
        // Active set is a curriculum prefix: losses recorded exactly for
        // types 1..=k.
        for rec in &trace.epochs {
            for (i, cell) in rec.type_loss.iter().enumerate() {
                assert_eq!(cell.is_some(), i < rec.active_types);
            }
        }
    }

    #[test]
    fn finetune_only_touches_encoder_and_its_head() {
        let (graph, s) = toy_split(40);
        let mut params = toy_params(3);
        let before = params.clone();
        train(
            &mut params,
            &graph,
            &s,
            &plan(Strategy::Finetune { type_id: 5 }, 1),
        )
        .unwrap();
        for (i, (now, then)) in params.heads.iter().zip(&before.heads).enumerate() {
            let changed = now.weight.values != then.weight.values;
            assert_eq!(changed, i == 4, "head {}", i + 1);
        }
        assert!(params
            .blocks
            .iter()
            .zip(&before.blocks)
            .any(|(a, b)| a.spatial_weight.values != b.spatial_weight.values));
        assert_eq!(
            params.gloss_head.weight.values,
            before.gloss_head.weight.values
        );
    }

    #[test]
    fn pretrain_reduces_gloss_loss() {
        let (graph, s) = toy_split(60);
        let mut params = toy_params(4);
        let trace = pretrain_gloss(&mut params, &graph, &s, &plan(Strategy::Multitask, 3)).unwrap();
        assert_eq!(trace.epochs.len(), 3);
        assert!(
            trace.epochs.last().unwrap().loss < trace.epochs[0].loss,
            "loss {} -> {}",
            trace.epochs[0].loss,
            trace.epochs.last().unwrap().loss
        );
    }

    #[test]
    fn pretrain_needs_data() {
        let (graph, mut s) = toy_split(20);
        s.train.clear();
        let mut params = toy_params(5);
        assert!(matches!(
            pretrain_gloss(&mut params, &graph, &s, &plan(Strategy::Multitask, 1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let (graph, mut s) = toy_split(20);
        s.train[0].pose = s.train[0].pose.fit_frames(5);
        let mut params = toy_params(6);
        assert!(matches!(
            train(&mut params, &graph, &s, &plan(Strategy::Multitask, 1)),
            Err(Error::Dimension { .. })
        ));
    }
}
