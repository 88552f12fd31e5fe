//! Deterministic train/validation/test splitting.
//!
//! Global sizes are fixed first by the rounding rule (validation floors
//! first, test second, train takes the remainder), then distributed across
//! gloss buckets by largest-remainder quotas. Example order inside each
//! bucket comes from a splitmix64 rank of (seed, id), so the split is a
//! pure function of the ids and the seed. Proportions are exact rationals,
//! making the floor arithmetic integer-exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::rng::{fnv1a64, splitmix64};
use super::LabeledExample;

/// Exact train/validation/test proportions. Each part is a fraction
/// num/den; the three must sum to exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProportions {
    pub train: (u64, u64),
    pub validation: (u64, u64),
    pub test: (u64, u64),
}

impl SplitProportions {
    /// The desk-scale reference split: 8/11, 1/11, 2/11 (2000/250/500 on a
    /// 2750-example corpus).
    pub fn desk_default() -> Self {
        SplitProportions {
            train: (8, 11),
            validation: (1, 11),
            test: (2, 11),
        }
    }

    pub fn new(train: (u64, u64), validation: (u64, u64), test: (u64, u64)) -> Result<Self> {
        let p = SplitProportions {
            train,
            validation,
            test,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parse "a,b,c" where each part is a decimal ("0.8") or a fraction
    /// ("8/11"), ordered train,validation,test.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "proportions '{text}' must have three comma-separated parts"
            )));
        }
        let mut fracs = [(0u64, 1u64); 3];
        for (slot, part) in fracs.iter_mut().zip(&parts) {
            *slot = parse_fraction(part.trim())?;
        }
        SplitProportions::new(fracs[0], fracs[1], fracs[2])
    }

    fn validate(&self) -> Result<()> {
        for (num, den) in [self.train, self.validation, self.test] {
            if den == 0 || num > den {
                return Err(Error::Config(format!(
                    "proportion {num}/{den} is not in [0, 1]"
                )));
            }
        }
        // Sum must be exactly 1: cross-multiplied integer check.
        let (tn, td) = self.train;
        let (vn, vd) = self.validation;
        let (sn, sd) = self.test;
        let lhs = (tn as u128) * (vd as u128) * (sd as u128)
            + (vn as u128) * (td as u128) * (sd as u128)
            + (sn as u128) * (td as u128) * (vd as u128);
        let rhs = (td as u128) * (vd as u128) * (sd as u128);
        if lhs != rhs {
            return Err(Error::Config(format!(
                "proportions {}/{} + {}/{} + {}/{} do not sum to 1",
                tn, td, vn, vd, sn, sd
            )));
        }
        Ok(())
    }
}

fn parse_fraction(text: &str) -> Result<(u64, u64)> {
    if let Some((a, b)) = text.split_once('/') {
        let num: u64 = a
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad fraction '{text}'")))?;
        let den: u64 = b
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad fraction '{text}'")))?;
        return Ok((num, den));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 12 {
            return Err(Error::Config(format!("too many decimals in '{text}'")));
        }
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| Error::Config(format!("bad proportion '{text}'")))?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse()
                .map_err(|_| Error::Config(format!("bad proportion '{text}'")))?
        };
        let den = 10u64.pow(digits.max(1));
        return Ok((whole * den + frac, den));
    }
    let whole: u64 = text
        .parse()
        .map_err(|_| Error::Config(format!("bad proportion '{text}'")))?;
    Ok((whole, 1))
}

/// floor(n * num / den) in exact integer arithmetic.
fn floor_mul(n: usize, (num, den): (u64, u64)) -> usize {
    ((n as u128) * (num as u128) / (den as u128)) as usize
}

/// Disjoint train/validation/test example lists.
#[derive(Debug)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub seed: u64,
}

/// Split a corpus. Consumes the examples; the assignment depends only on
/// (ids, glosses, seed) and the proportions.
pub fn split(
    examples: Vec<LabeledExample>,
    proportions: SplitProportions,
    seed: u64,
) -> Result<DatasetSplit> {
    proportions.validate()?;
    let n = examples.len();
    let n_val = floor_mul(n, proportions.validation);
    let n_test = floor_mul(n, proportions.test);
    let n_train = n - n_val - n_test;

    // Rank examples inside gloss buckets by a stateless hash of (seed, id).
    let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        buckets.entry(ex.gloss).or_default().push(i);
    }
    let rank = |id: &str| splitmix64(fnv1a64(id.as_bytes()) ^ seed);
    for bucket in buckets.values_mut() {
        bucket.sort_by(|&a, &b| {
            rank(&examples[a].id)
                .cmp(&rank(&examples[b].id))
                .then_with(|| examples[a].id.cmp(&examples[b].id))
        });
    }

    // Largest-remainder quotas per bucket, filling validation then test.
    let sizes: Vec<usize> = buckets.values().map(|b| b.len()).collect();
    let mut remaining: Vec<usize> = sizes.clone();
    let quota = |target: usize,
                 fraction: (u64, u64),
                 sizes: &[usize],
                 remaining: &mut [usize]|
     -> Vec<usize> {
        let mut q: Vec<usize> = sizes
            .iter()
            .map(|&s| floor_mul(s, fraction))
            .collect();
        for (qi, cap) in q.iter_mut().zip(remaining.iter()) {
            *qi = (*qi).min(*cap);
        }
        let mut assigned: usize = q.iter().sum();
        // Distribution order: largest fractional remainder first, bucket
        // order breaking ties.
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        let frac_part =
            |s: usize| ((s as u128) * (fraction.0 as u128)) % (fraction.1 as u128);
        order.sort_by(|&a, &b| frac_part(sizes[b]).cmp(&frac_part(sizes[a])).then(a.cmp(&b)));
        while assigned < target {
            let mut progressed = false;
            for &i in &order {
                if assigned == target {
                    break;
                }
                if q[i] < remaining[i] {
                    q[i] += 1;
                    assigned += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        for (cap, &qi) in remaining.iter_mut().zip(&q) {
            *cap -= qi;
        }
        q
    };
    let q_val = quota(n_val, proportions.validation, &sizes, &mut remaining);
    let q_test = quota(n_test, proportions.test, &sizes, &mut remaining);

    // Carve each ranked bucket: validation first, then test, rest train.
    let mut assignment = vec![2u8; n]; // 0=val, 1=test, 2=train
    for ((bucket, &qv), &qt) in buckets.values().zip(&q_val).zip(&q_test) {
        for (pos, &idx) in bucket.iter().enumerate() {
            assignment[idx] = if pos < qv {
                0
            } else if pos < qv + qt {
                1
            } else {
                2
            };
        }
    }

    let mut out = DatasetSplit {
        train: Vec::with_capacity(n_train),
        validation: Vec::with_capacity(n_val),
        test: Vec::with_capacity(n_test),
        seed,
    };
    for (ex, &slot) in examples.into_iter().zip(&assignment) {
        match slot {
            0 => out.validation.push(ex),
            1 => out.test.push(ex),
            _ => out.train.push(ex),
        }
    }
    debug_assert_eq!(out.validation.len(), n_val);
    debug_assert_eq!(out.test.len(), n_test);
    debug_assert_eq!(out.train.len(), n_train);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PoseSequence;

    fn fake_examples(n: usize, glosses: u32) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample {
                id: format!("ex{i:05}"),
                pose: PoseSequence::zeros(1, 1),
                gloss: (i as u32 % glosses) + 1,
                phonemes: [1; 16],
            })
            .collect()
    }

    #[test]
    fn hundred_at_80_10_10() {
        let p = SplitProportions::parse("0.8,0.1,0.1").unwrap();
        let s = split(fake_examples(100, 5), p, 7).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.validation.len(), 10);
        assert_eq!(s.test.len(), 10);
    }

    #[test]
    fn desk_corpus_sizes_are_exact() {
        let p = SplitProportions::desk_default();
        let s = split(fake_examples(2750, 20), p, 42).unwrap();
        assert_eq!(s.train.len(), 2000);
        assert_eq!(s.validation.len(), 250);
        assert_eq!(s.test.len(), 500);
    }

    #[test]
    fn all_in_train_when_proportions_say_so() {
        let p = SplitProportions::parse("1,0,0").unwrap();
        let s = split(fake_examples(37, 3), p, 1).unwrap();
        assert_eq!(s.train.len(), 37);
        assert!(s.validation.is_empty());
        assert!(s.test.is_empty());
    }

    #[test]
    fn bad_proportions_are_config_errors() {
        assert!(SplitProportions::parse("0.5,0.2,0.2").is_err());
        assert!(SplitProportions::parse("0.8,0.1").is_err());
        assert!(SplitProportions::parse("2,0,0").is_err());
        assert!(SplitProportions::parse("x,y,z").is_err());
        assert!(SplitProportions::parse("8/11,1/11,2/11").is_ok());
    }

    #[test]
    fn same_seed_same_split_different_seed_differs() {
        let p = SplitProportions::desk_default();
        let ids = |s: &DatasetSplit| {
            (
                s.train.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
                s.validation.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
                s.test.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
            )
        };
        let a = ids(&split(fake_examples(220, 10), p, 5).unwrap());
        let b = ids(&split(fake_examples(220, 10), p, 5).unwrap());
        let c = ids(&split(fake_examples(220, 10), p, 6).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let p = SplitProportions::parse("0.6,0.2,0.2").unwrap();
        let s = split(fake_examples(103, 7), p, 9).unwrap();
        let mut all: Vec<&str> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .map(|e| e.id.as_str())
            .collect();
        assert_eq!(all.len(), 103);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 103, "ids must be disjoint across splits");
    }

    #[test]
    fn stratified_by_gloss_within_one() {
        let p = SplitProportions::desk_default();
        let s = split(fake_examples(2750, 20), p, 42).unwrap();
        for part in [&s.validation, &s.test] {
            let mut counts = std::collections::BTreeMap::new();
            for ex in part.iter() {
                *counts.entry(ex.gloss).or_insert(0usize) += 1;
            }
            let min = counts.values().min().unwrap();
            let max = counts.values().max().unwrap();
            assert!(max - min <= 1, "gloss counts {counts:?}");
        }
    }
}
