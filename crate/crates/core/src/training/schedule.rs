//! Epoch schedules: cumulative curriculum size and cosine-annealed
//! learning rate.

use crate::error::{Error, Result};
use crate::taxonomy::TYPE_COUNT;

/// Number of phoneme types active at a (0-based) epoch under the
/// cumulative curriculum: a new type enters every `interval` epochs.
pub fn active_type_count(epoch: usize, interval: usize) -> Result<usize> {
    if interval == 0 {
        return Err(Error::Config("curriculum interval must be >= 1".into()));
    }
    Ok((epoch / interval + 1).min(TYPE_COUNT))
}

/// Cosine-annealed learning rate over a fixed epoch budget:
/// lr_min + (lr_max - lr_min)/2 · (1 + cos(π·epoch/(total-1))).
pub fn cosine_lr(epoch: usize, total_epochs: usize, lr_max: f64, lr_min: f64) -> Result<f64> {
    if epoch >= total_epochs {
        return Err(Error::Range(format!(
            "epoch {epoch} outside [0, {total_epochs})"
        )));
    }
    if total_epochs == 1 {
        return Ok(lr_max);
    }
    let progress = epoch as f64 / (total_epochs - 1) as f64;
    Ok(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curriculum_introduction_points() {
        assert_eq!(active_type_count(0, 20).unwrap(), 1);
        assert_eq!(active_type_count(19, 20).unwrap(), 1);
        assert_eq!(active_type_count(20, 20).unwrap(), 2);
        assert_eq!(active_type_count(300, 20).unwrap(), 16);
        assert_eq!(active_type_count(319, 20).unwrap(), 16);
        assert_eq!(active_type_count(10_000, 20).unwrap(), 16);
        assert!(active_type_count(3, 0).is_err());
    }

    #[test]
    fn count_is_monotone() {
        let mut last = 0;
        for epoch in 0..200 {
            let k = active_type_count(epoch, 3).unwrap();
            assert!(k >= last);
            assert!(k <= TYPE_COUNT);
            last = k;
        }
        assert_eq!(last, TYPE_COUNT);
    }

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let (hi, lo) = (1e-3, 1e-5);
        assert_eq!(cosine_lr(0, 101, hi, lo).unwrap(), hi);
        let end = cosine_lr(100, 101, hi, lo).unwrap();
        assert!((end - lo).abs() < 1e-18);
        let mid = cosine_lr(50, 101, hi, lo).unwrap();
        assert!((mid - (hi + lo) / 2.0).abs() < 1e-12);
        assert!(cosine_lr(101, 101, hi, lo).is_err());
        assert_eq!(cosine_lr(0, 1, hi, lo).unwrap(), hi);
    }

    #[test]
    fn cosine_is_monotone_decreasing() {
        let mut last = f64::INFINITY;
        for epoch in 0..48 {
            let lr = cosine_lr(epoch, 48, 1e-3, 1e-5).unwrap();
            assert!(lr < last);
            assert!(lr >= 1e-5 && lr <= 1e-3);
            last = lr;
        }
    }
}
