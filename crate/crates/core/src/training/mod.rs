//! The three learning strategies plus gloss pre-training: loss assembly,
//! curriculum scheduling, cosine-annealed learning rate, and the epoch
//! loop.

mod losses;
mod schedule;
mod trainer;

pub use losses::{
    batch_input, batch_loss, loss_curriculum, loss_finetune, loss_multitask, BatchLoss,
    LossTarget,
};
pub use schedule::{active_type_count, cosine_lr};
pub use trainer::{fit_examples, pretrain_gloss, train, GlossTrace, RunManifest};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{build_taxonomy, TYPE_COUNT};

/// Which learning strategy a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Strategy {
    /// Train the full model for one phoneme type.
    Finetune { type_id: usize },
    /// All sixteen heads jointly.
    Multitask,
    /// Types enter the objective cumulatively every `curriculum_interval`
    /// epochs.
    Curriculum,
}

/// Everything a training run needs to be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub strategy: Strategy,
    pub total_epochs: usize,
    /// Epochs between curriculum introductions (e).
    pub curriculum_interval: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub seed: u64,
    pub pretrained_checkpoint: Option<PathBuf>,
}

impl TrainingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.lr_min < self.lr_max) {
            return Err(Error::Config(format!(
                "lr_min {} must be below lr_max {}",
                self.lr_min, self.lr_max
            )));
        }
        match self.strategy {
            Strategy::Finetune { type_id } => {
                if type_id < 1 || type_id > TYPE_COUNT {
                    return Err(Error::Config(format!(
                        "fine-tune type id {type_id} outside [1, {TYPE_COUNT}]"
                    )));
                }
            }
            Strategy::Curriculum => {
                if self.curriculum_interval == 0 {
                    return Err(Error::Config("curriculum interval must be >= 1".into()));
                }
                if self.total_epochs != TYPE_COUNT * self.curriculum_interval {
                    return Err(Error::Config(format!(
                        "curriculum needs total_epochs = 16 * interval; got {} epochs for interval {}",
                        self.total_epochs, self.curriculum_interval
                    )));
                }
            }
            Strategy::Multitask => {}
        }
        Ok(())
    }
}

/// One completed epoch in a training trace. Loss and validation accuracy
/// are recorded for the types active that epoch.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub active_types: usize,
    pub type_loss: [Option<f64>; TYPE_COUNT],
    pub type_val_accuracy: [Option<f64>; TYPE_COUNT],
}

/// Per-epoch history of a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingTrace {
    /// CSV layout: epoch, lr, k, 16 per-type loss columns, 16 per-type
    /// validation accuracy columns. Inactive types are left empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let taxonomy = build_taxonomy();
        let mut writer =
            csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let mut header = vec!["epoch".to_string(), "lr".to_string(), "k".to_string()];
        for ty in taxonomy.types() {
            header.push(format!("loss_t{:02}", ty.id));
        }
        for ty in taxonomy.types() {
            header.push(format!("val_acc_t{:02}", ty.id));
        }
        writer
            .write_record(&header)
            .map_err(|e| Error::format(path, e.to_string()))?;
        for rec in &self.epochs {
            let mut row = vec![
                rec.epoch.to_string(),
                rec.lr.to_string(),
                rec.active_types.to_string(),
            ];
            for cell in rec.type_loss.iter().chain(rec.type_val_accuracy.iter()) {
                row.push(cell.map(|v| v.to_string()).unwrap_or_default());
            }
            writer
                .write_record(&row)
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(strategy: Strategy) -> TrainingPlan {
        TrainingPlan {
            strategy,
            total_epochs: 48,
            curriculum_interval: 3,
            batch_size: 32,
            lr_max: 1e-3,
            lr_min: 1e-5,
            seed: 42,
            pretrained_checkpoint: None,
        }
    }

    #[test]
    fn curriculum_requires_matching_budget() {
        assert!(plan(Strategy::Curriculum).validate().is_ok());
        let mut bad = plan(Strategy::Curriculum);
        bad.total_epochs = 100;
        assert!(bad.validate().is_err());
        let mut bad = plan(Strategy::Curriculum);
        bad.curriculum_interval = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn plan_bounds() {
        let mut bad = plan(Strategy::Multitask);
        bad.batch_size = 0;
        assert!(bad.validate().is_err());
        let mut bad = plan(Strategy::Multitask);
        bad.lr_min = bad.lr_max;
        assert!(bad.validate().is_err());
        assert!(plan(Strategy::Finetune { type_id: 16 }).validate().is_ok());
        assert!(plan(Strategy::Finetune { type_id: 0 }).validate().is_err());
        assert!(plan(Strategy::Finetune { type_id: 17 }).validate().is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let p = plan(Strategy::Finetune { type_id: 3 });
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"name\":\"finetune\""), "{json}");
        let back: TrainingPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let mut trace = TrainingTrace::default();
        let mut rec = EpochRecord {
            epoch: 0,
            lr: 0.001,
            active_types: 1,
            type_loss: [None; 16],
            type_val_accuracy: [None; 16],
        };
        rec.type_loss[0] = Some(1.5);
        rec.type_val_accuracy[0] = Some(25.0);
        trace.epochs.push(rec);
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("epoch,lr,k,loss_t01,"));
        assert!(header.ends_with("val_acc_t16"));
        assert_eq!(header.split(',').count(), 3 + 32);
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,0.001,1,1.5,"), "{row}");
    }
}
