//! Connected-component post-processing of a fused probability map.
//!
//! Cases whose thresholded foreground is small have their low-confidence
//! components pruned: any component whose peak probability is below
//! `min_peak_probability` is removed. Larger cases are instead re-thresholded
//! at `high_threshold`, which tends to split weakly connected lesions. The
//! two branches are exclusive.

use serde::{Deserialize, Serialize};

use crate::components::{annotate_peaks, label_components, remove_components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{threshold, BinaryMask, ProbabilityMap};

pub const POSTPROCESS_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessParams {
    pub base_threshold: f32,
    pub high_threshold: f32,
    pub min_peak_probability: f32,
    /// Cases with at most this many foreground voxels take the small branch.
    pub small_case_cutoff: usize,
    pub connectivity: Connectivity,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self {
            base_threshold: 0.5,
            high_threshold: 0.55,
            min_peak_probability: 0.7,
            small_case_cutoff: 5000,
            connectivity: Connectivity::TwentySix,
        }
    }
}

impl PostprocessParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f32| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} = {v} must lie in [0, 1]"
                )))
            }
        };
        unit("base_threshold", self.base_threshold)?;
        unit("high_threshold", self.high_threshold)?;
        unit("min_peak_probability", self.min_peak_probability)?;
        if self.base_threshold > self.high_threshold {
            return Err(Error::InvalidParameter(format!(
                "base_threshold ({}) must not exceed high_threshold ({})",
                self.base_threshold, self.high_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Small,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedComponent {
    pub id: u32,
    pub size: usize,
    pub peak_probability: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub format_version: u32,
    pub branch: Branch,
    pub components_before: usize,
    pub components_after: usize,
    pub removed_component_ids: Vec<u32>,
    pub removed_components: Vec<RemovedComponent>,
    pub foreground_before: usize,
    pub foreground_after: usize,
}

pub fn postprocess(
    p: &ProbabilityMap,
    params: &PostprocessParams,
) -> Result<(BinaryMask, PostprocessReport)> {
    params.validate()?;
    let base = threshold(p, params.base_threshold)?;
    let foreground_before = base.foreground_count();
    let components = label_components(&base, params.connectivity);
    let components_before = components.count();

    if foreground_before <= params.small_case_cutoff {
        let components = annotate_peaks(components, p)?;
        let removed: Vec<RemovedComponent> = components
            .stats()
            .iter()
            .filter_map(|s| {
                let peak = s.peak_probability.expect("peaks annotated");
                (peak < params.min_peak_probability).then_some(RemovedComponent {
                    id: s.label,
                    size: s.size,
                    peak_probability: peak,
                })
            })
            .collect();
        let ids: Vec<u32> = removed.iter().map(|r| r.id).collect();
        let pruned = remove_components(&base, &components, &ids)?;
        let report = PostprocessReport {
            format_version: POSTPROCESS_REPORT_VERSION,
            branch: Branch::Small,
            components_before,
            // removing whole components neither merges nor splits the rest
            components_after: components_before - removed.len(),
            removed_component_ids: ids,
            removed_components: removed,
            foreground_before,
            foreground_after: pruned.foreground_count(),
        };
        Ok((pruned, report))
    } else {
        let split = threshold(p, params.high_threshold)?;
        let report = PostprocessReport {
            format_version: POSTPROCESS_REPORT_VERSION,
            branch: Branch::Large,
            components_before,
            components_after: label_components(&split, params.connectivity).count(),
            removed_component_ids: Vec::new(),
            removed_components: Vec::new(),
            foreground_before,
            foreground_after: split.foreground_count(),
        };
        Ok((split, report))
    }
}
