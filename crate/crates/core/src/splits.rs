//! Lesion-size-balanced K-fold assignment.
//!
//! Subjects are sorted by `(lesion_volume, subject_id)` and cut into
//! consecutive strata of `k` subjects. Each stratum is shuffled with
//! [`SplitMix64`] and dealt one subject per fold; the fold order alternates
//! direction from one stratum to the next (serpentine), so the folds receive
//! subjects of matching size rank and differ in size by at most one.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SplitMix64 (Steele, Lea & Flood). State advances by
/// `0x9E3779B97F4A7C15`; output mixes with multipliers
/// `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB` and shifts 30, 27, 31.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in `0..bound` as the high word of
    /// `next_u64() * bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        ((u128::from(self.next_u64()) * bound as u128) >> 64) as usize
    }

    /// Fisher-Yates, swapping index `i` (from the end) with `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub lesion_volume: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// subject id -> fold index in `0..k`
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, subject_id: &str) -> Option<usize> {
        self.folds.get(subject_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

fn check_unique(records: &[SubjectRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.subject_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate subject id {:?}",
                r.subject_id
            )));
        }
    }
    Ok(())
}

/// Records sorted by `(lesion_volume, subject_id)` and chunked into strata of
/// `k`, the last possibly shorter.
pub fn strata(records: &[SubjectRecord], k: usize) -> Vec<Vec<&SubjectRecord>> {
    let mut sorted: Vec<&SubjectRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.lesion_volume
            .cmp(&b.lesion_volume)
            .then_with(|| a.subject_id.cmp(&b.subject_id))
    });
    sorted.chunks(k).map(|c| c.to_vec()).collect()
}

pub fn size_balanced_split(
    records: &[SubjectRecord],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if k > records.len() {
        return Err(Error::InvalidParameter(format!(
            "fold count {k} exceeds the {} subjects available",
            records.len()
        )));
    }
    check_unique(records)?;

    let mut rng = SplitMix64::new(seed);
    let mut folds = BTreeMap::new();
    for (s, mut stratum) in strata(records, k).into_iter().enumerate() {
        rng.shuffle(&mut stratum);
        for (slot, record) in stratum.into_iter().enumerate() {
            let fold = if s % 2 == 0 { slot } else { k - 1 - slot };
            folds.insert(record.subject_id.clone(), fold);
        }
    }
    Ok(FoldAssignment { k, seed, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub fold: usize,
    pub count: usize,
    /// `None` for an empty fold.
    pub mean_volume: Option<f64>,
    pub median_volume: Option<f64>,
}

pub fn fold_summary(fa: &FoldAssignment, records: &[SubjectRecord]) -> Result<Vec<FoldStats>> {
    let volumes: BTreeMap<&str, u64> = records
        .iter()
        .map(|r| (r.subject_id.as_str(), r.lesion_volume))
        .collect();
    let mut per_fold: Vec<Vec<u64>> = vec![Vec::new(); fa.k];
    for (id, &fold) in &fa.folds {
        let v = *volumes
            .get(id.as_str())
            .ok_or_else(|| Error::Validation(format!("subject {id:?} is not in the cohort")))?;
        let bucket = per_fold.get_mut(fold).ok_or_else(|| {
            Error::Validation(format!(
                "subject {id:?} assigned to fold {fold} of {}",
                fa.k
            ))
        })?;
        bucket.push(v);
    }
    Ok(per_fold
        .into_iter()
        .enumerate()
        .map(|(fold, mut v)| {
            v.sort_unstable();
            let n = v.len();
            let mean = (n > 0).then(|| v.iter().map(|&x| x as f64).sum::<f64>() / n as f64);
            let median = (n > 0).then(|| {
                if n % 2 == 1 {
                    v[n / 2] as f64
                } else {
                    (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
                }
            });
            FoldStats {
                fold,
                count: n,
                mean_volume: mean,
                median_volume: median,
            }
        })
        .collect())
}
